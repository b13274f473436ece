#include "ntlab/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "ntlab/errors.hpp"

namespace ntlab {

using ad::Graph;
using ad::Var;

Embedded embed(Graph& g, FeatureExtractor& F, const Batches& b) {
  Embedded e;
  if (!b.source.empty()) {
    e.source = feature_forward(g, F, g.constant(b.source.x));
    e.has_source = true;
  }
  if (!b.target_labeled.empty()) {
    e.target_labeled = feature_forward(g, F, g.constant(b.target_labeled.x));
    e.has_labeled = true;
  }
  if (b.has_unlabeled()) {
    e.target_unlabeled = feature_forward(g, F, g.constant(b.target_unlabeled));
    e.has_unlabeled = true;
  }
  return e;
}

double omega_from_d(double d, double delta) {
  const double c = std::clamp(d, delta, 1.0 - delta);
  return c / (1.0 - c);
}

GateBatch gate_weights(Graph& g, JointDiscriminator& D, Var source_features, const std::vector<int>& labels,
                       double delta) {
  for (int y : labels) {
    if (y < 0) throw ContractError("gate weights need real class labels, got nil/hidden");
  }
  Var lab = g.constant(encode_labels(labels, D.num_classes));
  Var d = ad::sigmoid(discriminator_logit(g, D, source_features, lab));
  GateBatch out;
  out.omega = ad::stop_grad(ad::clamped_odds(d, delta));
  const Tensor& dv = d.value();
  const Tensor& ov = out.omega.value();
  out.weights.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out.weights.push_back({ov[i], dv[i]});
  return out;
}

GateWeight gate_weight(const JointDiscriminator& D, const FeatureExtractor& F, const std::vector<double>& x,
                       std::optional<int> y, double delta) {
  if (!y) throw ContractError("gate_weight: the gate applies to labeled source pairs, not nil");
  const Tensor f = feature_forward(F, Tensor::matrix(1, x.size(), x));
  const Tensor lab = Tensor::matrix(1, D.num_classes + 1, encode_label(y, D.num_classes));
  const double d = discriminate(D, f, lab).item();
  return {omega_from_d(d, delta), d};
}

namespace {

Var mean_xent(Graph& g, Classifier& C, Var f, const std::vector<int>& y) {
  return ad::mean_rows(ad::softmax_xent(classifier_logits(g, C, f), y));
}

Var plus(std::optional<Var>& acc, Var term) {
  acc = acc ? ad::add(*acc, term) : term;
  return *acc;
}

}  // namespace

Var clf_loss(Graph& g, Classifier& C, const Embedded& e, const Batches& b, double source_scale) {
  std::optional<Var> total;
  if (e.has_labeled) plus(total, mean_xent(g, C, e.target_labeled, b.target_labeled.y));
  if (e.has_source) {
    Var s = mean_xent(g, C, e.source, b.source.y);
    plus(total, source_scale == 1.0 ? s : ad::scale(s, source_scale));
  }
  if (!total) throw ContractError("classification loss undefined: labeled target and source batches are both empty");
  return *total;
}

Var gated_clf_loss(Graph& g, Classifier& C, const Embedded& e, const Batches& b, Var omega, double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("gated classification: lambda must be >= 0");
  std::optional<Var> total;
  if (e.has_labeled) plus(total, mean_xent(g, C, e.target_labeled, b.target_labeled.y));
  if (e.has_source) {
    Var per_example = ad::softmax_xent(classifier_logits(g, C, e.source), b.source.y);
    Var s = ad::mean_rows(ad::mul(omega, per_example));
    plus(total, lambda == 1.0 ? s : ad::scale(s, lambda));
  }
  if (!total) throw ContractError("classification loss undefined: labeled target and source batches are both empty");
  return *total;
}

namespace {

std::optional<Var> selected_terms(Graph& g, JointDiscriminator& D, const Embedded& e, const Batches& b,
                                  const AdvTerms& terms) {
  const std::size_t K = D.num_classes;
  std::optional<Var> total;
  // log D = -bce(z, 1); log(1 - D) = -bce(z, 0)
  auto term = [&](Var f, Tensor labels, double target) {
    Var z = discriminator_logit(g, D, f, g.constant(std::move(labels)));
    const std::vector<double> t(z.value().rows(), target);
    plus(total, ad::scale(ad::mean_rows(ad::bce_logits(z, t)), -1.0));
  };
  if (terms.nil_target && e.has_unlabeled) {
    term(e.target_unlabeled, encode_nil_labels(b.target_unlabeled.rows(), K), 1.0);
  }
  if (terms.nil_source && e.has_source) term(e.source, encode_nil_labels(b.source.size(), K), 0.0);
  if (terms.joint_target && e.has_labeled) term(e.target_labeled, encode_labels(b.target_labeled.y, K), 1.0);
  if (terms.joint_source && e.has_source) term(e.source, encode_labels(b.source.y, K), 0.0);
  return total;
}

}  // namespace

Var adversarial_loss(Graph& g, JointDiscriminator& D, const Embedded& e, const Batches& b, const AdvTerms& terms) {
  std::optional<Var> total = selected_terms(g, D, e, b, terms);
  if (!total) throw ConfigError("adversarial loss undefined: every selected term has an empty batch");
  return *total;
}

namespace {

Embedded reversed(const Embedded& e, double mu) {
  Embedded r = e;
  if (r.has_source) r.source = ad::grad_reverse(e.source, mu);
  if (r.has_labeled) r.target_labeled = ad::grad_reverse(e.target_labeled, mu);
  if (r.has_unlabeled) r.target_unlabeled = ad::grad_reverse(e.target_unlabeled, mu);
  return r;
}

void require_target_batch(const Batches& b) {
  if (!b.has_unlabeled() && b.target_labeled.empty()) {
    throw ConfigError("adversarial loss needs at least one target batch");
  }
}

}  // namespace

Var clf_loss(Graph& g, ModelTriple& m, const Batches& b) { return clf_loss(g, m.C, embed(g, m.F, b), b); }

Var gated_clf_loss(Graph& g, ModelTriple& m, const Batches& b, double lambda, double delta) {
  const Embedded e = embed(g, m.F, b);
  Var omega = e.has_source ? gate_weights(g, m.D, e.source, b.source.y, delta).omega : g.constant(Tensor::scalar(1.0));
  return gated_clf_loss(g, m.C, e, b, omega, lambda);
}

Var marginal_adv_loss(Graph& g, ModelTriple& m, const Batches& b, double mu) {
  require_target_batch(b);
  return adversarial_loss(g, m.D, reversed(embed(g, m.F, b), mu), b, AdvTerms::marginal());
}

Var aug_adv_loss(Graph& g, ModelTriple& m, const Batches& b, double mu) {
  require_target_batch(b);
  return adversarial_loss(g, m.D, reversed(embed(g, m.F, b), mu), b, AdvTerms::augmented());
}

LossBundle total_objective(Graph& g, ModelTriple& m, const Batches& b, Variant variant, const ObjectiveOptions& opts) {
  const Wiring w = wiring_for(variant);
  if (!(opts.mu >= 0.0)) throw ConfigError("total_objective: mu must be >= 0");
  if (!(opts.lambda >= 0.0)) throw ConfigError("total_objective: lambda must be >= 0");
  if (w.gated && b.source.empty()) {
    throw ConfigError(std::string("variant ") + std::string(to_string(variant)) + " needs a source batch for the gate");
  }
  if (b.source.x.empty() != b.source.y.empty() || b.target_labeled.x.empty() != b.target_labeled.y.empty()) {
    throw ConfigError("total_objective: batch inputs and labels disagree on emptiness");
  }

  const Embedded e = embed(g, m.F, b);
  LossBundle out;

  std::optional<Var> clf;
  if (e.has_source || e.has_labeled) {
    if (w.gated) {
      Var omega;
      if (opts.gate_enabled) {
        GateBatch gate = gate_weights(g, m.D, e.source, b.source.y, opts.omega_clamp);
        omega = gate.omega;
        out.omegas = std::move(gate.weights);
      } else {
        omega = g.constant(Tensor(std::vector<std::size_t>{b.source.size(), 1}, 1.0));
      }
      clf = gated_clf_loss(g, m.C, e, b, omega, opts.lambda);
    } else {
      clf = clf_loss(g, m.C, e, b, w.scale_source ? opts.lambda : 1.0);
    }
    out.clf_loss = clf->value().item();
  }

  // Matched terms reach F through the reversal; the rest only train D.
  std::optional<Var> adv, matched;
  if (e.has_unlabeled || e.has_labeled) {
    matched = selected_terms(g, m.D, reversed(e, opts.mu), b, w.terms & w.matched);
    std::optional<Var> detached = selected_terms(g, m.D, reversed(e, 0.0), b, w.terms - w.matched);
    adv = matched;
    if (detached) plus(adv, *detached);
  }
  if (adv) out.adv_loss = adv->value().item();

  if (clf && adv) {
    out.objective = ad::sub(*clf, *adv);
  } else if (clf) {
    out.objective = *clf;
  } else if (adv) {
    out.objective = ad::scale(*adv, -1.0);
  } else {
    throw ConfigError(std::string("variant ") + std::string(to_string(variant)) + ": no active loss term for these batches");
  }
  out.total = out.clf_loss - (matched ? opts.mu * matched->value().item() : 0.0);
  return out;
}

}  // namespace ntlab
