#pragma once

// Synthetic source/target domains with closed-form densities, the source
// perturbation protocol and the target train/test/labeled split.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ntlab/tensor.hpp"

namespace ntlab {

struct GaussianComponent {
  std::vector<double> mean;
  double stddev = 1.0;  // isotropic
  double weight = 1.0;  // relative weight within its class
};

/// Input corruption applied to perturbed source examples: additive isotropic
/// Gaussian noise, then an independent sign flip of each coordinate.
struct NoiseModel {
  double stddev = 3.0;
  double flip_prob = 0.5;
};

struct ScenarioSpec {
  std::size_t num_classes = 0;
  std::vector<std::vector<GaussianComponent>> components;  // one list per class
  std::vector<double> prior;                               // empty means uniform
  NoiseModel noise;

  std::size_t input_dim() const;
  double class_prior(std::size_t k) const;
  /// Throws ConfigError on an inconsistent or degenerate spec.
  void validate() const;
};

/// K classes, one component each, means evenly spaced on a circle of the
/// given radius (first class at angle 90 degrees plus rotation), then shifted.
ScenarioSpec ring_scenario(std::size_t num_classes, double radius, double stddev,
                           double rotation_deg = 0.0, std::vector<double> offset = {0.0, 0.0});
/// One class, one 1-D Gaussian component.
ScenarioSpec gaussian_1d(double mean, double stddev);

inline constexpr int kHiddenLabel = -1;

struct Example {
  std::vector<double> x;
  int y = kHiddenLabel;
  bool perturbed_x = false;
  bool perturbed_y = false;

  bool perturbed() const noexcept { return perturbed_x || perturbed_y; }
  friend bool operator==(const Example&, const Example&) = default;
};

struct PerturbationConfig {
  double eps_x = 0.0;
  double eps_y = 0.0;
  std::uint64_t seed = 0;
};

struct TargetSplit {
  std::vector<Example> labeled;
  std::vector<Example> unlabeled;  // whole train half, labels hidden
  std::vector<Example> test;
  std::vector<std::string> warnings;
};

struct DomainData {
  std::vector<Example> source;
  std::vector<Example> target_labeled;
  std::vector<Example> target_unlabeled;
  std::vector<Example> target_test;
  std::size_t num_classes = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

/// I.i.d. draws from the spec's class-conditional mixture; pure in (spec, n, seed).
std::vector<Example> sample_scenario(const ScenarioSpec& spec, std::size_t n, std::uint64_t seed);

/// Independent Bernoulli(eps_x) input corruption and Bernoulli(eps_y) label
/// redraw (uniform over all classes) per example. The random stream consumed
/// per example does not depend on eps, so perturbed sets are nested in eps
/// for a fixed seed.
std::vector<Example> perturb_source(const std::vector<Example>& source, const PerturbationConfig& cfg,
                                    const ScenarioSpec& spec);

/// 50/50 train/test split, class-stratified labeled subset of round(L% * n_train)
/// examples from the train half. max_per_class caps labeled examples per class.
TargetSplit split_target(const std::vector<Example>& target, double l_pct, std::uint64_t seed,
                         std::optional<std::size_t> max_per_class = std::nullopt);

/// Stratified labeled-count allocation used by split_target. Returns per-class
/// counts and appends a warning when a class would receive none.
std::vector<std::size_t> labeled_allocation(const std::vector<std::size_t>& class_counts, double l_pct,
                                            std::optional<std::size_t> max_per_class,
                                            std::vector<std::string>* warnings);

double log_joint_density(const ScenarioSpec& spec, const std::vector<double>& x, int y);
/// P_T(x, y) / P_S(x, y). Throws DomainError when a density is at or below 1e-300.
double analytic_density_ratio(const ScenarioSpec& target, const ScenarioSpec& source,
                              const std::vector<double>& x, int y);

struct DomainSetup {
  ScenarioSpec source_spec;
  ScenarioSpec target_spec;
  std::size_t n_source = 2000;
  std::size_t n_target = 400;
  std::optional<std::size_t> max_labeled_per_class;

  /// Three-class ring (radius 2, stddev 1, prior 0.6/0.25/0.15); the source
  /// copy is rotated by 10 degrees and shifted by 0.3 along the first axis.
  static DomainSetup standard();
};

/// Full S / T_l / T_u / test assembly for one seed. Target data depends only
/// on (setup, l_pct, seed); eps only touches the source.
DomainData make_domain_data(const DomainSetup& setup, double eps_x, double eps_y, double l_pct,
                            std::uint64_t seed);

Tensor inputs_of(const std::vector<Example>& xs);
std::vector<int> labels_of(const std::vector<Example>& xs);

}  // namespace ntlab
