#pragma once

// Loss terms of the gated transfer objective.
//
// Sign convention: the graph scalar that is descended is
//     objective = classification - adversarial,
// with every feature fed to D routed through grad_reverse(mu). One backward
// therefore moves F and C down the classification loss, D up the adversarial
// value, and F down mu * adversarial. The reported total is
//     total = classification - mu * adversarial.

#include <vector>

#include "ntlab/autodiff.hpp"
#include "ntlab/networks.hpp"
#include "ntlab/variant.hpp"

namespace ntlab {

inline constexpr double kDefaultOmegaClamp = 1e-3;

struct LabeledBatch {
  Tensor x;  // (n x input_dim), empty when n = 0
  std::vector<int> y;
  std::vector<bool> perturbed;  // source only; informational

  bool empty() const noexcept { return y.empty(); }
  std::size_t size() const noexcept { return y.size(); }
};

struct Batches {
  LabeledBatch source;
  LabeledBatch target_labeled;
  Tensor target_unlabeled;  // empty when absent

  bool has_unlabeled() const noexcept { return !target_unlabeled.empty(); }
};

/// Features of each non-empty batch computed once per graph.
struct Embedded {
  ad::Var source, target_labeled, target_unlabeled;
  bool has_source = false, has_labeled = false, has_unlabeled = false;
};

Embedded embed(ad::Graph& g, FeatureExtractor& F, const Batches& b);

struct GateWeight {
  double omega = 1.0;
  double raw_d = 0.5;
};

/// d / (1 - d) with d clamped to [delta, 1 - delta].
double omega_from_d(double d, double delta = kDefaultOmegaClamp);

struct GateBatch {
  ad::Var omega;  // (n x 1), behind stop_grad
  std::vector<GateWeight> weights;
};

/// Gate weights of a labeled source batch from live source features. D binds
/// its parameters as graph leaves; the stop_grad is what keeps gradient out.
GateBatch gate_weights(ad::Graph& g, JointDiscriminator& D, ad::Var source_features,
                       const std::vector<int>& labels, double delta = kDefaultOmegaClamp);

/// Gate weight of one labeled source pair. Throws ContractError for a nil label.
GateWeight gate_weight(const JointDiscriminator& D, const FeatureExtractor& F, const std::vector<double>& x,
                       std::optional<int> y, double delta = kDefaultOmegaClamp);

// Classification terms on precomputed features --------------------------------

/// mean CE over labeled target + source_scale * mean CE over source.
ad::Var clf_loss(ad::Graph& g, Classifier& C, const Embedded& e, const Batches& b, double source_scale = 1.0);
/// mean CE over labeled target + lambda * mean(omega_i * CE_i) over source.
ad::Var gated_clf_loss(ad::Graph& g, Classifier& C, const Embedded& e, const Batches& b, ad::Var omega,
                       double lambda);

// Adversarial terms -------------------------------------------------------------

/// Sum of the selected terms of
///   mean log D(f_u, nil) + mean log(1 - D(f_s, nil))
/// + mean log D(f_l, y_l) + mean log(1 - D(f_s, y_s)).
/// Features must already carry any gradient reversal. Terms whose batch is
/// empty are omitted; throws ConfigError when nothing remains.
ad::Var adversarial_loss(ad::Graph& g, JointDiscriminator& D, const Embedded& e, const Batches& b,
                         const AdvTerms& terms);

// Whole-model forms (build features themselves) ----------------------------------

ad::Var clf_loss(ad::Graph& g, ModelTriple& m, const Batches& b);
ad::Var gated_clf_loss(ad::Graph& g, ModelTriple& m, const Batches& b, double lambda,
                       double delta = kDefaultOmegaClamp);
/// Marginal adversarial value; features reach D through grad_reverse(mu).
ad::Var marginal_adv_loss(ad::Graph& g, ModelTriple& m, const Batches& b, double mu = 1.0);
/// Augmented adversarial value; features reach D through grad_reverse(mu).
ad::Var aug_adv_loss(ad::Graph& g, ModelTriple& m, const Batches& b, double mu = 1.0);

struct ObjectiveOptions {
  double mu = 1.0;
  double lambda = 1.0;
  double omega_clamp = kDefaultOmegaClamp;
  bool gate_enabled = true;  // false forces omega = 1 (warmup)
};

struct LossBundle {
  double clf_loss = 0.0;
  double adv_loss = 0.0;  // 0 when no adversarial term is active
  double total = 0.0;     // clf_loss - mu * (matched part of adv_loss)
  std::vector<GateWeight> omegas;  // per source example, gated variants only
  ad::Var objective;               // descended scalar
};

LossBundle total_objective(ad::Graph& g, ModelTriple& m, const Batches& b, Variant variant,
                           const ObjectiveOptions& opts);

}  // namespace ntlab
