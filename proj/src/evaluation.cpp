#include "ntlab/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ntlab/errors.hpp"

namespace ntlab {

RiskEstimate expected_risk(const Predictor& h, const std::vector<Example>& test, LossKind kind) {
  if (test.empty()) throw DomainError("expected_risk: empty test set");
  const Tensor p = h(inputs_of(test));
  if (p.rows() != test.size()) throw ShapeError("expected_risk: predictor returned the wrong number of rows");
  double total = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto y = static_cast<std::size_t>(test[i].y);
    if (test[i].y < 0 || y >= p.cols()) throw DomainError("expected_risk: test example without a valid label");
    if (kind == LossKind::zero_one) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < p.cols(); ++j)
        if (p(i, j) > p(i, best)) best = j;
      total += best == y ? 0.0 : 1.0;
    } else {
      total += -std::log(std::max(p(i, y), 1e-300));
    }
  }
  return {total / static_cast<double>(test.size()), kind, test.size()};
}

RiskEstimate expected_risk(const ModelTriple& h, const std::vector<Example>& test, LossKind kind) {
  return expected_risk([&h](const Tensor& x) { return predict_proba(h, x); }, test, kind);
}

NTGReport make_report(const RiskEstimate& with_source, const RiskEstimate& target_only, Variant v) {
  NTGReport r;
  r.risk_with_source = with_source;
  r.risk_target_only = target_only;
  r.ntg = with_source.risk - target_only.risk;
  r.ntc = with_source.risk > target_only.risk;
  r.variant = v;
  if (r.ntc != (r.ntg > 0.0)) throw ContractError("NTC verdict disagrees with the sign of NTG");
  return r;
}

NTGReport negative_transfer_gap(const DomainData& data, const TrainConfig& cfg, Variant variant) {
  if (variant == Variant::target_only) {
    throw ConfigError("negative_transfer_gap: the target-only baseline is the comparison arm, not a variant");
  }
  const TargetData t{data.target_labeled, data.target_unlabeled, data.num_classes};
  const TrainResult with = run_algorithm(data.source, t, cfg, variant);
  const TrainResult without = run_algorithm(std::nullopt, t, cfg, Variant::target_only);
  NTGReport r = make_report(expected_risk(with.model, data.target_test), expected_risk(without.model, data.target_test),
                            variant);
  r.seed = cfg.seed;
  return r;
}

WeightStats weight_stats(const JointDiscriminator& D, const FeatureExtractor& F, const std::vector<Example>& source,
                         double delta) {
  WeightStats s;
  if (source.empty()) return s;
  const Tensor f = feature_forward(F, inputs_of(source));
  const Tensor d = discriminate(D, f, encode_labels(labels_of(source), D.num_classes));
  double sum_p = 0.0, sum_c = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const double omega = omega_from_d(d[i], delta);
    if (source[i].perturbed()) {
      sum_p += omega;
      ++s.n_perturbed;
    } else {
      sum_c += omega;
      ++s.n_clean;
    }
    const auto bin = std::min(kHistogramBins - 1, static_cast<std::size_t>(d[i] * static_cast<double>(kHistogramBins)));
    ++s.d_histogram[bin];
  }
  if (s.n_perturbed) s.mean_omega_perturbed = sum_p / static_cast<double>(s.n_perturbed);
  if (s.n_clean) s.mean_omega_clean = sum_c / static_cast<double>(s.n_clean);
  return s;
}

std::vector<std::pair<std::vector<double>, int>> ratio_grid(const ScenarioSpec& target, const ScenarioSpec& source,
                                                            double lo, double hi, std::size_t points_per_dim,
                                                            double density_floor) {
  if (points_per_dim < 2) throw ConfigError("ratio_grid: need at least two points per dimension");
  const std::size_t dim = target.input_dim();
  std::size_t total = 1;
  for (std::size_t k = 0; k < dim; ++k) total *= points_per_dim;
  std::vector<std::pair<std::vector<double>, int>> out;
  const double step = (hi - lo) / static_cast<double>(points_per_dim - 1);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::vector<double> x(dim);
    std::size_t rem = idx;
    for (std::size_t k = 0; k < dim; ++k) {
      x[k] = lo + step * static_cast<double>(rem % points_per_dim);
      rem /= points_per_dim;
    }
    for (std::size_t y = 0; y < target.num_classes; ++y) {
      const int label = static_cast<int>(y);
      if (std::exp(log_joint_density(target, x, label)) > density_floor &&
          std::exp(log_joint_density(source, x, label)) > density_floor) {
        out.emplace_back(x, label);
      }
    }
  }
  return out;
}

double ratio_fit_error(const RatioFunction& omega, const ScenarioSpec& target, const ScenarioSpec& source,
                       const std::vector<std::pair<std::vector<double>, int>>& grid, double density_floor) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [x, y] : grid) {
    if (std::exp(log_joint_density(target, x, y)) <= density_floor ||
        std::exp(log_joint_density(source, x, y)) <= density_floor) {
      continue;
    }
    const double r = analytic_density_ratio(target, source, x, y);
    sum += std::abs(omega(x, y) - r) / r;
    ++n;
  }
  if (n == 0) throw DomainError("ratio_fit_error: no grid point clears the density floor");
  return sum / static_cast<double>(n);
}

double ratio_fit_error(const JointDiscriminator& D, const FeatureExtractor& F, const ScenarioSpec& target,
                       const ScenarioSpec& source, const std::vector<std::pair<std::vector<double>, int>>& grid,
                       double delta) {
  auto omega = [&](const std::vector<double>& x, int y) { return gate_weight(D, F, x, y, delta).omega; };
  return ratio_fit_error(omega, target, source, grid);
}

SeedSummary summarize(const std::vector<double>& xs) {
  SeedSummary s;
  s.n = xs.size();
  if (xs.empty()) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    s.stderr_ = s.stddev / std::sqrt(static_cast<double>(xs.size()));
  }
  return s;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw DomainError("spearman: need two equal-length samples of size >= 2");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / static_cast<double>(ra.size());
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / static_cast<double>(rb.size());
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace ntlab
