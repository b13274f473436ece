#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ntlab/domains.hpp"
#include "ntlab/networks.hpp"
#include "ntlab/objectives.hpp"
#include "ntlab/variant.hpp"

namespace ntlab {

struct TrainConfig {
  double lambda = 1.0;
  double mu_max = 1.0;
  double learning_rate = 3e-3;
  std::size_t steps = 2000;
  std::size_t source_batch = 64;
  std::size_t unlabeled_batch = 64;
  std::size_t labeled_batch = 64;  // effective size is min(n_l, labeled_batch)
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  double omega_clamp = kDefaultOmegaClamp;
  double gate_warmup = 0.1;  // fraction of steps with omega forced to 1
  std::size_t log_interval = 100;
  std::size_t hidden = 64;
  std::size_t feature_dim = 16;
  std::size_t disc_hidden = 64;

  /// One message per invalid field, each starting with "train.<field>".
  std::vector<std::string> violations() const;
  /// Throws ConfigError with the first violation.
  void validate() const;
  ModelDims dims(std::size_t input_dim, std::size_t num_classes) const {
    return {input_dim, hidden, feature_dim, disc_hidden, num_classes};
  }
};

/// Adaptive-moment optimizer over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<ad::Parameter*> params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step();
  std::size_t steps_taken() const noexcept { return t_; }
  double learning_rate() const noexcept { return lr_; }
  void set_learning_rate(double lr) noexcept { lr_ = lr; }

 private:
  std::vector<ad::Parameter*> params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

/// mu_max * (2 / (1 + exp(-10 p)) - 1). p outside [0, 1] is clamped and,
/// when a sink is given, a warning is appended.
double mu_schedule(double p, double mu_max, std::vector<std::string>* warnings = nullptr);

struct HistoryRecord {
  std::size_t step = 0;  // last step of the interval (1-based)
  double mu = 0.0;
  double clf_loss = 0.0;  // interval means
  double adv_loss = 0.0;
  std::optional<double> mean_omega_perturbed;
  std::optional<double> mean_omega_clean;
  std::optional<double> labeled_target_accuracy;
};

struct TrainHistory {
  std::vector<HistoryRecord> records;
  std::vector<std::string> warnings;
};

struct TrainResult {
  ModelTriple model;
  TrainHistory history;
};

/// Min-max training of one variant. A pure function of (data, cfg, variant).
TrainResult train(const DomainData& data, const TrainConfig& cfg, Variant variant);

struct TargetData {
  std::vector<Example> labeled;
  std::vector<Example> unlabeled;
  std::size_t num_classes = 0;
};

/// h = A(S, T). With no source (or the source-ignoring stub) the target-only
/// wiring is used. Throws ConfigError when the variant needs a source and none is given.
TrainResult run_algorithm(const std::optional<std::vector<Example>>& source, const TargetData& target,
                          const TrainConfig& cfg, Variant variant);

struct RatioFitConfig {
  std::size_t steps = 3000;
  std::size_t batch = 128;
  double learning_rate = 1e-3;
  bool anneal = true;  // linear decay of the step size to zero
  std::uint64_t seed = 0;
  std::size_t hidden = 64;
  std::size_t feature_dim = 16;
  std::size_t disc_hidden = 64;
};

/// Trains F and D jointly (no reversal) to tell labeled target pairs from
/// labeled source pairs, so D / (1 - D) estimates P_T(x, y) / P_S(x, y).
ModelTriple fit_density_ratio(const std::vector<Example>& target, const std::vector<Example>& source,
                              std::size_t num_classes, const RatioFitConfig& cfg);

}  // namespace ntlab
