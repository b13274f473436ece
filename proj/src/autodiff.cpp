#include "ntlab/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "ntlab/errors.hpp"

namespace ntlab::ad {

const char* op_name(Op op) noexcept {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::matmul: return "matmul";
    case Op::add: return "add";
    case Op::add_row: return "add_row";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::scale: return "scale";
    case Op::tanh: return "tanh";
    case Op::relu: return "relu";
    case Op::sigmoid: return "sigmoid";
    case Op::log: return "log";
    case Op::mean_rows: return "mean_rows";
    case Op::softmax_xent: return "softmax_xent";
    case Op::bce_logits: return "bce_logits";
    case Op::concat_cols: return "concat_cols";
    case Op::grad_reverse: return "grad_reverse";
    case Op::stop_grad: return "stop_grad";
    case Op::clamped_odds: return "clamped_odds";
  }
  return "?";
}

const Tensor& Var::value() const {
  if (!graph) throw ContractError("value() on a detached Var");
  return graph->value(*this);
}

const Tensor& Var::grad() const {
  if (!graph) throw ContractError("grad() on a detached Var");
  return graph->grad(*this);
}

int Graph::check(Var v) const {
  if (v.graph != this) throw ContractError("Var belongs to a different graph");
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw ContractError("Var id " + std::to_string(v.id) + " does not name an existing node");
  }
  return v.id;
}

Var Graph::push_leaf(Tensor value, bool requires_grad, Parameter* param) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.param = param;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::constant(Tensor value) { return push_leaf(std::move(value), false, nullptr); }

Var Graph::variable(Tensor value) { return push_leaf(std::move(value), true, nullptr); }

Var Graph::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{this, it->second};
  Var v = push_leaf(p.value, true, &p);
  param_nodes_.emplace(&p, v.id);
  return v;
}

Var Graph::push(Op op, std::vector<Var> inputs, Tensor value, double attr, Tensor aux) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.attr = attr;
  n.aux = std::move(aux);
  for (Var in : inputs) {
    // Inputs must precede the new node, which rules out cycles.
    n.inputs.push_back(check(in));
    n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
  }
  if (op == Op::stop_grad) n.requires_grad = false;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

const Tensor& Graph::value(Var v) const { return nodes_[check(v)].value; }

const Tensor& Graph::grad(Var v) const {
  const Node& n = nodes_[check(v)];
  if (!n.grad.empty()) return n.grad;
  zero_scratch_ = Tensor(n.value.shape());
  return zero_scratch_;
}

bool Graph::requires_grad(Var v) const { return nodes_[check(v)].requires_grad; }

Op Graph::op(Var v) const { return nodes_[check(v)].op; }

void Graph::zero_grad() {
  for (Node& n : nodes_) n.grad = Tensor();
}

void Graph::accumulate(int id, const Tensor& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.empty()) {
    n.grad = g;
    return;
  }
  auto dst = n.grad.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Graph::backward(Var loss) {
  const Tensor& v = value(loss);
  if (v.size() != 1) {
    throw ContractError("backward(loss) needs a scalar loss node, got shape " + v.shape_string());
  }
  backward(loss, Tensor::scalar(1.0));
}

void Graph::backward(Var out, const Tensor& upstream) {
  const int root = check(out);
  if (!upstream.same_shape(nodes_[root].value)) {
    throw ShapeError("upstream gradient " + upstream.shape_string() + " does not match node " +
                     nodes_[root].value.shape_string());
  }
  zero_grad();
  accumulate(root, upstream);
  for (int id = root; id >= 0; --id) {
    const Node& n = nodes_[id];
    if (n.grad.empty() || n.op == Op::leaf) continue;
    propagate(n);
  }
  for (const Node& n : nodes_) {
    if (!n.param || n.grad.empty()) continue;
    if (n.param->grad.empty() || !n.param->grad.same_shape(n.param->value)) {
      n.param->grad = Tensor(n.param->value.shape());
    }
    auto dst = n.param->grad.data();
    auto src = n.grad.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

namespace {

double sigmoid_scalar(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

// Dense products go through Eigen over row-major maps of the tensor storage.
using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap view(const Tensor& t) { return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                                                 static_cast<Eigen::Index>(t.cols())); }

Tensor matmul_values(const Tensor& a, const Tensor& b) {
  Tensor c = Tensor::zeros(a.rows(), b.cols());
  MutMap(c.data().data(), static_cast<Eigen::Index>(c.rows()), static_cast<Eigen::Index>(c.cols())).noalias() =
      view(a) * view(b);
  return c;
}

// g (n x m) * b^T (m x k) -> (n x k)
Tensor matmul_rhs_t(const Tensor& g, const Tensor& b) {
  Tensor out = Tensor::zeros(g.rows(), b.rows());
  MutMap(out.data().data(), static_cast<Eigen::Index>(out.rows()), static_cast<Eigen::Index>(out.cols())).noalias() =
      view(g) * view(b).transpose();
  return out;
}

// a^T (k x n) * g (n x m) -> (k x m)
Tensor matmul_lhs_t(const Tensor& a, const Tensor& g) {
  Tensor out = Tensor::zeros(a.cols(), g.cols());
  MutMap(out.data().data(), static_cast<Eigen::Index>(out.rows()), static_cast<Eigen::Index>(out.cols())).noalias() =
      view(a).transpose() * view(g);
  return out;
}

}  // namespace

void Graph::propagate(const Node& n) {
  const Tensor& g = n.grad;
  auto in = [&](std::size_t k) -> const Node& { return nodes_[n.inputs[k]]; };
  auto wants = [&](std::size_t k) { return nodes_[n.inputs[k]].requires_grad; };

  switch (n.op) {
    case Op::leaf:
    case Op::stop_grad:
      return;
    case Op::matmul: {
      if (wants(0)) accumulate(n.inputs[0], matmul_rhs_t(g, in(1).value));
      if (wants(1)) accumulate(n.inputs[1], matmul_lhs_t(in(0).value, g));
      return;
    }
    case Op::add:
      accumulate(n.inputs[0], g);
      accumulate(n.inputs[1], g);
      return;
    case Op::add_row: {
      accumulate(n.inputs[0], g);
      if (wants(1)) {
        const std::size_t rows = g.rows(), cols = g.cols();
        Tensor gb = Tensor::zeros(1, cols);
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < cols; ++j) gb[j] += g[i * cols + j];
        accumulate(n.inputs[1], gb);
      }
      return;
    }
    case Op::sub: {
      accumulate(n.inputs[0], g);
      if (wants(1)) {
        Tensor neg = g;
        for (double& v : neg.data()) v = -v;
        accumulate(n.inputs[1], neg);
      }
      return;
    }
    case Op::mul: {
      for (std::size_t k = 0; k < 2; ++k) {
        if (!wants(k)) continue;
        const Tensor& other = in(1 - k).value;
        Tensor d = g;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= other[i];
        accumulate(n.inputs[k], d);
      }
      return;
    }
    case Op::scale:
    case Op::grad_reverse: {
      const double c = n.op == Op::scale ? n.attr : -n.attr;
      Tensor d = g;
      for (double& v : d.data()) v *= c;
      accumulate(n.inputs[0], d);
      return;
    }
    case Op::tanh: {
      Tensor d = g;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= 1.0 - n.value[i] * n.value[i];
      accumulate(n.inputs[0], d);
      return;
    }
    case Op::relu: {
      Tensor d = g;
      const Tensor& x = in(0).value;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = x[i] > 0.0 ? d[i] : 0.0;
      accumulate(n.inputs[0], d);
      return;
    }
    case Op::sigmoid: {
      Tensor d = g;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= n.value[i] * (1.0 - n.value[i]);
      accumulate(n.inputs[0], d);
      return;
    }
    case Op::log: {
      Tensor d = g;
      const Tensor& x = in(0).value;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] /= x[i];
      accumulate(n.inputs[0], d);
      return;
    }
    case Op::mean_rows: {
      const Tensor& x = in(0).value;
      Tensor d(x.shape());
      const double inv = 1.0 / static_cast<double>(x.rows());
      for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) d(i, j) = g(0, j) * inv;
      accumulate(n.inputs[0], d);
      return;
    }
    case Op::softmax_xent: {
      const Tensor& z = in(0).value;
      Tensor d(z.shape());
      for (std::size_t i = 0; i < z.rows(); ++i) {
        double mx = z(i, 0);
        for (std::size_t j = 1; j < z.cols(); ++j) mx = std::max(mx, z(i, j));
        double s = 0.0;
        for (std::size_t j = 0; j < z.cols(); ++j) s += std::exp(z(i, j) - mx);
        const auto label = static_cast<std::size_t>(n.aux[i]);
        for (std::size_t j = 0; j < z.cols(); ++j) {
          const double p = std::exp(z(i, j) - mx) / s;
          d(i, j) = g(i, 0) * (p - (j == label ? 1.0 : 0.0));
        }
      }
      accumulate(n.inputs[0], d);
      return;
    }
    case Op::bce_logits: {
      const Tensor& z = in(0).value;
      Tensor d(z.shape());
      for (std::size_t i = 0; i < z.rows(); ++i) d(i, 0) = g(i, 0) * (sigmoid_scalar(z(i, 0)) - n.aux[i]);
      accumulate(n.inputs[0], d);
      return;
    }
    case Op::concat_cols: {
      const std::size_t ca = in(0).value.cols(), cb = in(1).value.cols();
      Tensor da = Tensor::zeros(g.rows(), ca), db = Tensor::zeros(g.rows(), cb);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < ca; ++j) da(i, j) = g(i, j);
        for (std::size_t j = 0; j < cb; ++j) db(i, j) = g(i, ca + j);
      }
      accumulate(n.inputs[0], da);
      accumulate(n.inputs[1], db);
      return;
    }
    case Op::clamped_odds: {
      const Tensor& x = in(0).value;
      const double lo = n.attr, hi = 1.0 - n.attr;
      Tensor d = g;
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (x[i] <= lo || x[i] >= hi) {
          d[i] = 0.0;
        } else {
          const double q = 1.0 - x[i];
          d[i] /= q * q;
        }
      }
      accumulate(n.inputs[0], d);
      return;
    }
  }
}

// ---------------------------------------------------------------------------
// Forward ops

namespace {

Graph& graph_of(Var a) {
  if (!a.graph) throw ContractError("operation on a detached Var");
  return *a.graph;
}

Graph& graph_of(Var a, Var b) {
  if (a.graph != b.graph || !a.graph) throw ContractError("operands belong to different graphs");
  return *a.graph;
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected rank-2 operand, got " + t.shape_string());
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  require_rank2(a, op);
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
}

template <class F>
Var unary(Var a, Op op, F&& f, double attr = 0.0) {
  Graph& g = graph_of(a);
  Tensor y = a.value();
  require_rank2(y, op_name(op));
  for (double& v : y.data()) v = f(v);
  return g.push(op, {a}, std::move(y), attr);
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  require_rank2(x, "matmul");
  require_rank2(w, "matmul");
  if (x.cols() != w.rows()) {
    throw ShapeError("matmul: inner dimensions differ " + x.shape_string() + " * " + w.shape_string());
  }
  return g.push(Op::matmul, {a, b}, matmul_values(x, w));
}

Var add(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same(a.value(), b.value(), "add");
  Tensor y = a.value();
  const Tensor& o = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += o[i];
  return g.push(Op::add, {a, b}, std::move(y));
}

Var add_row(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& x = a.value();
  const Tensor& r = b.value();
  require_rank2(x, "add_row");
  require_rank2(r, "add_row");
  if (r.rows() != 1 || r.cols() != x.cols()) {
    throw ShapeError("add_row: row " + r.shape_string() + " cannot broadcast onto " + x.shape_string());
  }
  Tensor y = x;
  const std::size_t rows = y.rows(), cols = y.cols();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) y[i * cols + j] += r[j];
  return g.push(Op::add_row, {a, b}, std::move(y));
}

Var sub(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same(a.value(), b.value(), "sub");
  Tensor y = a.value();
  const Tensor& o = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= o[i];
  return g.push(Op::sub, {a, b}, std::move(y));
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same(a.value(), b.value(), "mul");
  Tensor y = a.value();
  const Tensor& o = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= o[i];
  return g.push(Op::mul, {a, b}, std::move(y));
}

Var scale(Var a, double c) {
  return unary(a, Op::scale, [c](double v) { return c * v; }, c);
}

Var tanh(Var a) {
  Graph& g = graph_of(a);
  Tensor y = a.value();
  require_rank2(y, "tanh");
  Eigen::Map<Eigen::ArrayXd> v(y.data().data(), static_cast<Eigen::Index>(y.size()));
  const Eigen::ArrayXd e = (-2.0 * v.abs()).exp();
  v = ((1.0 - e) / (1.0 + e)) * v.sign();
  return g.push(Op::tanh, {a}, std::move(y));
}

Var relu(Var a) {
  return unary(a, Op::relu, [](double v) { return v > 0.0 ? v : 0.0; });
}

Var sigmoid(Var a) { return unary(a, Op::sigmoid, sigmoid_scalar); }

Var log(Var a) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) throw DomainError("log: non-positive input " + std::to_string(v));
  }
  return unary(a, Op::log, [](double v) { return std::log(v); });
}

Var mean_rows(Var a) {
  Graph& g = graph_of(a);
  const Tensor& x = a.value();
  require_rank2(x, "mean_rows");
  Tensor y = Tensor::zeros(1, x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) y(0, j) += x(i, j);
  const double inv = 1.0 / static_cast<double>(x.rows());
  for (double& v : y.data()) v *= inv;
  return g.push(Op::mean_rows, {a}, std::move(y));
}

Var softmax_xent(Var logits, const std::vector<int>& labels) {
  Graph& g = graph_of(logits);
  const Tensor& z = logits.value();
  require_rank2(z, "softmax_xent");
  if (labels.size() != z.rows()) {
    throw ShapeError("softmax_xent: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(z.rows()) + " rows");
  }
  Tensor aux = Tensor::zeros(z.rows(), 1);
  Tensor y = Tensor::zeros(z.rows(), 1);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= z.cols()) {
      throw DomainError("softmax_xent: label " + std::to_string(labels[i]) + " outside [0, " +
                        std::to_string(z.cols()) + ")");
    }
    double mx = z(i, 0);
    for (std::size_t j = 1; j < z.cols(); ++j) mx = std::max(mx, z(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < z.cols(); ++j) s += std::exp(z(i, j) - mx);
    y(i, 0) = mx + std::log(s) - z(i, static_cast<std::size_t>(labels[i]));
    aux[i] = labels[i];
  }
  return g.push(Op::softmax_xent, {logits}, std::move(y), 0.0, std::move(aux));
}

Var bce_logits(Var logits, const std::vector<double>& targets) {
  Graph& g = graph_of(logits);
  const Tensor& z = logits.value();
  require_rank2(z, "bce_logits");
  if (z.cols() != 1 || targets.size() != z.rows()) {
    throw ShapeError("bce_logits: expected (n x 1) logits with n targets, got " + z.shape_string());
  }
  Tensor aux = Tensor::zeros(z.rows(), 1);
  Tensor y = Tensor::zeros(z.rows(), 1);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const double t = targets[i];
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("bce_logits: target outside [0,1]");
    y(i, 0) = softplus(z(i, 0)) - t * z(i, 0);
    aux[i] = t;
  }
  return g.push(Op::bce_logits, {logits}, std::move(y), 0.0, std::move(aux));
}

Var concat_cols(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_rank2(x, "concat_cols");
  require_rank2(y, "concat_cols");
  if (x.rows() != y.rows()) {
    throw ShapeError("concat_cols: row counts differ " + x.shape_string() + " vs " + y.shape_string());
  }
  Tensor out = Tensor::zeros(x.rows(), x.cols() + y.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j);
    for (std::size_t j = 0; j < y.cols(); ++j) out(i, x.cols() + j) = y(i, j);
  }
  return g.push(Op::concat_cols, {a, b}, std::move(out));
}

Var grad_reverse(Var a, double mu) {
  if (!(mu >= 0.0) || !std::isfinite(mu)) {
    throw ConfigError("grad_reverse: mu must be a finite value >= 0, got " + std::to_string(mu));
  }
  Graph& g = graph_of(a);
  return g.push(Op::grad_reverse, {a}, a.value(), mu);
}

Var stop_grad(Var a) {
  Graph& g = graph_of(a);
  return g.push(Op::stop_grad, {a}, a.value());
}

Var clamped_odds(Var a, double delta) {
  if (!(delta > 0.0 && delta < 0.5)) throw ConfigError("clamped_odds: delta must lie in (0, 0.5)");
  return unary(
      a, Op::clamped_odds,
      [delta](double v) {
        const double c = std::clamp(v, delta, 1.0 - delta);
        return c / (1.0 - c);
      },
      delta);
}

}  // namespace ntlab::ad
