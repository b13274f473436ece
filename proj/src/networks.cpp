#include "ntlab/networks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "ntlab/errors.hpp"

namespace ntlab {

using ad::Graph;
using ad::Var;

namespace {

Var bind(Graph& g, ad::Parameter& p) { return g.param(p); }
Var bind(Graph& g, const ad::Parameter& p) { return g.constant(p.value); }

template <class L>
Var linear(Graph& g, L& layer, Var x) {
  return ad::add_row(ad::matmul(x, bind(g, layer.weight)), bind(g, layer.bias));
}

void require_width(const Tensor& t, std::size_t width, const char* what) {
  if (t.rank() != 2 || t.cols() != width) {
    throw ShapeError(std::string(what) + ": expected width " + std::to_string(width) + ", got " +
                     t.shape_string());
  }
}

template <class FE>
Var feature_impl(Graph& g, FE& F, Var x) {
  require_width(x.value(), F.input_dim(), "feature_forward");
  Var h = ad::tanh(linear(g, F.l1, x));
  h = ad::tanh(linear(g, F.l2, h));
  return ad::tanh(linear(g, F.l3, h));
}

template <class CL>
Var classifier_impl(Graph& g, CL& C, Var f) {
  require_width(f.value(), C.out.in_dim(), "classify");
  return linear(g, C.out, f);
}

template <class DS>
Var discriminator_impl(Graph& g, DS& D, Var f, Var labels) {
  const std::size_t label_width = D.num_classes + 1;
  require_width(labels.value(), label_width, "discriminate(labels)");
  require_width(f.value(), D.hidden.in_dim() - label_width, "discriminate(features)");
  Var h = ad::tanh(linear(g, D.hidden, ad::concat_cols(f, labels)));
  return linear(g, D.out, h);
}

Linear make_linear(const std::string& name, std::size_t in, std::size_t out, std::mt19937_64* rng) {
  Linear l{ad::Parameter(name + ".weight", Tensor::zeros(in, out)),
           ad::Parameter(name + ".bias", Tensor::zeros(1, out))};
  if (rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-a, a);
    for (double& w : l.weight.value.data()) w = u(*rng);
  }
  return l;
}

ModelTriple build(const ModelDims& d, std::mt19937_64* rng) {
  if (d.input_dim == 0 || d.hidden == 0 || d.feature_dim == 0 || d.disc_hidden == 0 || d.num_classes == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  ModelTriple m;
  m.dims = d;
  m.F.l1 = make_linear("F.l1", d.input_dim, d.hidden, rng);
  m.F.l2 = make_linear("F.l2", d.hidden, d.hidden, rng);
  m.F.l3 = make_linear("F.l3", d.hidden, d.feature_dim, rng);
  m.C.out = make_linear("C.out", d.feature_dim, d.num_classes, rng);
  m.D.hidden = make_linear("D.hidden", d.feature_dim + d.num_classes + 1, d.disc_hidden, rng);
  m.D.out = make_linear("D.out", d.disc_hidden, 1, rng);
  m.D.num_classes = d.num_classes;
  return m;
}

}  // namespace

ModelTriple ModelTriple::init(const ModelDims& dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return build(dims, &rng);
}

ModelTriple ModelTriple::zeros(const ModelDims& dims) { return build(dims, nullptr); }

std::vector<ad::Parameter*> ModelTriple::parameters() {
  return {&F.l1.weight, &F.l1.bias, &F.l2.weight, &F.l2.bias, &F.l3.weight, &F.l3.bias,
          &C.out.weight, &C.out.bias, &D.hidden.weight, &D.hidden.bias, &D.out.weight, &D.out.bias};
}

std::vector<const ad::Parameter*> ModelTriple::parameters() const {
  auto ps = const_cast<ModelTriple*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

void ModelTriple::zero_grad() {
  for (ad::Parameter* p : parameters()) p->zero_grad();
}

LabelInput encode_label(std::optional<int> y, std::size_t num_classes) {
  LabelInput v(num_classes + 1, 0.0);
  if (!y) {
    v[num_classes] = 1.0;
    return v;
  }
  if (*y < 0 || static_cast<std::size_t>(*y) >= num_classes) {
    throw DomainError("encode_label: class " + std::to_string(*y) + " outside [0, " +
                      std::to_string(num_classes) + ")");
  }
  v[static_cast<std::size_t>(*y)] = 1.0;
  return v;
}

Tensor encode_labels(const std::vector<int>& ys, std::size_t num_classes) {
  Tensor t = Tensor::zeros(ys.size(), num_classes + 1);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const LabelInput v = encode_label(ys[i], num_classes);
    std::copy(v.begin(), v.end(), &t(i, 0));
  }
  return t;
}

Tensor encode_nil_labels(std::size_t n, std::size_t num_classes) {
  Tensor t = Tensor::zeros(n, num_classes + 1);
  for (std::size_t i = 0; i < n; ++i) t(i, num_classes) = 1.0;
  return t;
}

Var feature_forward(Graph& g, FeatureExtractor& F, Var x) { return feature_impl(g, F, x); }
Var feature_forward(Graph& g, const FeatureExtractor& F, Var x) { return feature_impl(g, F, x); }

Tensor feature_forward(const FeatureExtractor& F, const Tensor& x) {
  Graph g;
  return feature_impl(g, F, g.constant(x)).value();
}

Var classifier_logits(Graph& g, Classifier& C, Var f) { return classifier_impl(g, C, f); }
Var classifier_logits(Graph& g, const Classifier& C, Var f) { return classifier_impl(g, C, f); }

Tensor classify(const Classifier& C, const Tensor& features) {
  Graph g;
  Tensor p = classifier_impl(g, C, g.constant(features)).value();
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double mx = p(i, 0);
    for (std::size_t j = 1; j < p.cols(); ++j) mx = std::max(mx, p(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < p.cols(); ++j) {
      p(i, j) = std::exp(p(i, j) - mx);
      s += p(i, j);
    }
    for (std::size_t j = 0; j < p.cols(); ++j) p(i, j) /= s;
  }
  return p;
}

Var discriminator_logit(Graph& g, JointDiscriminator& D, Var f, Var labels) {
  return discriminator_impl(g, D, f, labels);
}
Var discriminator_logit(Graph& g, const JointDiscriminator& D, Var f, Var labels) {
  return discriminator_impl(g, D, f, labels);
}

Tensor discriminate(const JointDiscriminator& D, const Tensor& features, const Tensor& labels) {
  Graph g;
  Tensor d = ad::sigmoid(discriminator_impl(g, D, g.constant(features), g.constant(labels))).value();
  const double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  for (double& v : d.data()) v = std::clamp(v, lo, hi);
  return d;
}

Tensor predict_proba(const ModelTriple& m, const Tensor& x) {
  return classify(m.C, feature_forward(m.F, x));
}

std::vector<int> predict(const ModelTriple& m, const Tensor& x) {
  const Tensor p = predict_proba(m, x);
  std::vector<int> out(p.rows());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < p.cols(); ++j)
      if (p(i, j) > p(i, best)) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

}  // namespace ntlab
