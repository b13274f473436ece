#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "ntlab/domains.hpp"
#include "ntlab/networks.hpp"
#include "ntlab/training.hpp"

namespace ntlab {

enum class LossKind { zero_one, cross_entropy };

struct RiskEstimate {
  double risk = 0.0;
  LossKind loss_kind = LossKind::zero_one;
  std::size_t n_test = 0;
};

/// Maps a batch of inputs (n x d) to class probabilities (n x K).
using Predictor = std::function<Tensor(const Tensor&)>;

/// Empirical risk over a test set. Throws DomainError on an empty set.
RiskEstimate expected_risk(const Predictor& h, const std::vector<Example>& test, LossKind kind = LossKind::zero_one);
RiskEstimate expected_risk(const ModelTriple& h, const std::vector<Example>& test, LossKind kind = LossKind::zero_one);

struct NTGReport {
  RiskEstimate risk_with_source;
  RiskEstimate risk_target_only;
  double ntg = 0.0;  // risk_with_source - risk_target_only
  bool ntc = false;  // ntg > 0
  Variant variant = Variant::base;
  std::uint64_t seed = 0;
  double eps_x = 0.0, eps_y = 0.0, l_pct = 0.0;
};

/// Pairs two risks into a report and checks the ntc <=> ntg > 0 invariant.
NTGReport make_report(const RiskEstimate& with_source, const RiskEstimate& target_only, Variant v);

/// Trains the variant on (S, T) and the target-only baseline on (empty, T)
/// with the same seed, and compares 0-1 risks on the shared test split.
NTGReport negative_transfer_gap(const DomainData& data, const TrainConfig& cfg, Variant variant);

inline constexpr std::size_t kHistogramBins = 20;

struct WeightStats {
  std::optional<double> mean_omega_perturbed;
  std::optional<double> mean_omega_clean;
  std::size_t n_perturbed = 0;
  std::size_t n_clean = 0;
  std::array<std::size_t, kHistogramBins> d_histogram{};  // raw d over [0, 1]
};

WeightStats weight_stats(const JointDiscriminator& D, const FeatureExtractor& F, const std::vector<Example>& source,
                         double delta = kDefaultOmegaClamp);

/// Gate weight as a function of a point and its label.
using RatioFunction = std::function<double(const std::vector<double>&, int)>;

/// Grid points (x, y) of a target/source scenario pair where both joint
/// densities exceed the floor.
std::vector<std::pair<std::vector<double>, int>> ratio_grid(const ScenarioSpec& target, const ScenarioSpec& source,
                                                            double lo, double hi, std::size_t points_per_dim,
                                                            double density_floor = 1e-3);

/// Mean over the valid grid of |omega - r| / r with r the analytic ratio.
/// Throws DomainError when no grid point clears the density floor.
double ratio_fit_error(const RatioFunction& omega, const ScenarioSpec& target, const ScenarioSpec& source,
                       const std::vector<std::pair<std::vector<double>, int>>& grid, double density_floor = 1e-3);
double ratio_fit_error(const JointDiscriminator& D, const FeatureExtractor& F, const ScenarioSpec& target,
                       const ScenarioSpec& source, const std::vector<std::pair<std::vector<double>, int>>& grid,
                       double delta = kDefaultOmegaClamp);

struct SeedSummary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1)
  double stderr_ = 0.0;
  std::size_t n = 0;
};
SeedSummary summarize(const std::vector<double>& xs);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace ntlab
