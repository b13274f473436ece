#include "ntlab/domains.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "ntlab/errors.hpp"
#include "ntlab/rng.hpp"

namespace ntlab {

std::size_t ScenarioSpec::input_dim() const {
  if (components.empty() || components.front().empty()) return 0;
  return components.front().front().mean.size();
}

double ScenarioSpec::class_prior(std::size_t k) const {
  return prior.empty() ? 1.0 / static_cast<double>(num_classes) : prior.at(k);
}

void ScenarioSpec::validate() const {
  if (num_classes == 0) throw ConfigError("scenario: num_classes must be positive");
  if (components.size() != num_classes) {
    throw ConfigError("scenario: expected one component list per class (" + std::to_string(num_classes) +
                      "), got " + std::to_string(components.size()));
  }
  const std::size_t dim = input_dim();
  if (dim == 0) throw ConfigError("scenario: component means must be non-empty");
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (components[k].empty()) throw ConfigError("scenario: class " + std::to_string(k) + " has no components");
    for (const GaussianComponent& c : components[k]) {
      if (c.mean.size() != dim) throw ConfigError("scenario: component dimensions differ");
      if (!(c.stddev > 0.0) || !std::isfinite(c.stddev)) throw ConfigError("scenario: stddev must be > 0");
      if (!(c.weight > 0.0)) throw ConfigError("scenario: component weight must be > 0");
    }
  }
  if (!prior.empty()) {
    if (prior.size() != num_classes) throw ConfigError("scenario: prior length differs from num_classes");
    double s = 0.0;
    for (double p : prior) {
      if (!(p >= 0.0)) throw ConfigError("scenario: negative class prior");
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ConfigError("scenario: class priors must sum to 1");
  }
  if (!(noise.stddev >= 0.0)) throw ConfigError("scenario: noise stddev must be >= 0");
  if (!(noise.flip_prob >= 0.0 && noise.flip_prob <= 1.0)) {
    throw ConfigError("scenario: flip probability must lie in [0, 1]");
  }
}

ScenarioSpec ring_scenario(std::size_t num_classes, double radius, double stddev, double rotation_deg,
                           std::vector<double> offset) {
  if (offset.size() != 2) throw ConfigError("ring_scenario: offset must be 2-D");
  ScenarioSpec s;
  s.num_classes = num_classes;
  for (std::size_t k = 0; k < num_classes; ++k) {
    const double angle = (90.0 + rotation_deg + 360.0 * static_cast<double>(k) / static_cast<double>(num_classes)) *
                         std::numbers::pi / 180.0;
    s.components.push_back(
        {GaussianComponent{{radius * std::cos(angle) + offset[0], radius * std::sin(angle) + offset[1]}, stddev, 1.0}});
  }
  s.validate();
  return s;
}

ScenarioSpec gaussian_1d(double mean, double stddev) {
  ScenarioSpec s;
  s.num_classes = 1;
  s.components = {{GaussianComponent{{mean}, stddev, 1.0}}};
  s.validate();
  return s;
}

std::vector<Example> sample_scenario(const ScenarioSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  if (n == 0) throw ConfigError("sample_scenario: n must be positive");
  std::mt19937_64 rng(seed);
  std::vector<double> priors(spec.num_classes);
  for (std::size_t k = 0; k < spec.num_classes; ++k) priors[k] = spec.class_prior(k);
  std::discrete_distribution<int> pick_class(priors.begin(), priors.end());
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Example> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = pick_class(rng);
    const auto& comps = spec.components[static_cast<std::size_t>(y)];
    std::size_t c = 0;
    if (comps.size() > 1) {
      std::vector<double> w;
      for (const auto& comp : comps) w.push_back(comp.weight);
      c = static_cast<std::size_t>(std::discrete_distribution<int>(w.begin(), w.end())(rng));
    }
    Example e;
    e.y = y;
    e.x = comps[c].mean;
    for (double& v : e.x) v += comps[c].stddev * normal(rng);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<Example> perturb_source(const std::vector<Example>& source, const PerturbationConfig& cfg,
                                    const ScenarioSpec& spec) {
  if (!(cfg.eps_x >= 0.0 && cfg.eps_x <= 1.0) || !(cfg.eps_y >= 0.0 && cfg.eps_y <= 1.0)) {
    throw ConfigError("perturb_source: eps_x and eps_y must lie in [0, 1]");
  }
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> any_class(0, static_cast<int>(spec.num_classes) - 1);

  std::vector<Example> out = source;
  for (Example& e : out) {
    // Fixed draw order per example, regardless of eps.
    const double ux = unit(rng);
    const double uy = unit(rng);
    std::vector<double> noisy = e.x;
    for (double& v : noisy) {
      v += spec.noise.stddev * normal(rng);
      if (unit(rng) < spec.noise.flip_prob) v = -v;
    }
    const int new_label = any_class(rng);
    if (ux < cfg.eps_x) {
      e.x = std::move(noisy);
      e.perturbed_x = true;
    }
    if (uy < cfg.eps_y) {
      e.y = new_label;
      e.perturbed_y = true;
    }
  }
  return out;
}

std::vector<std::size_t> labeled_allocation(const std::vector<std::size_t>& class_counts, double l_pct,
                                            std::optional<std::size_t> max_per_class,
                                            std::vector<std::string>* warnings) {
  if (!(l_pct >= 0.0 && l_pct <= 100.0)) throw ConfigError("labeled percentage must lie in [0, 100]");
  const std::size_t n_train = std::accumulate(class_counts.begin(), class_counts.end(), std::size_t{0});
  const std::size_t K = class_counts.size();
  std::vector<std::size_t> alloc(K, 0);
  if (l_pct == 0.0 || n_train == 0) return alloc;

  const auto n_l = static_cast<std::size_t>(std::llround(l_pct / 100.0 * static_cast<double>(n_train)));
  // Largest-remainder apportionment of n_l over classes by class size.
  std::vector<double> remainder(K);
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const double quota = static_cast<double>(n_l) * static_cast<double>(class_counts[k]) / static_cast<double>(n_train);
    alloc[k] = static_cast<std::size_t>(std::floor(quota));
    remainder[k] = quota - std::floor(quota);
    assigned += alloc[k];
  }
  std::vector<std::size_t> order(K);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < n_l && i < K; ++i, ++assigned) ++alloc[order[i]];

  bool raised = false;
  for (std::size_t k = 0; k < K; ++k) {
    if (alloc[k] == 0 && class_counts[k] > 0) {
      alloc[k] = 1;
      raised = true;
    }
    if (max_per_class) alloc[k] = std::min(alloc[k], *max_per_class);
    alloc[k] = std::min(alloc[k], class_counts[k]);
  }
  if (raised && warnings) {
    warnings->push_back("labeled fraction " + std::to_string(l_pct) +
                        "% gives fewer than one labeled example for some class; rounded up to one per class");
  }
  return alloc;
}

TargetSplit split_target(const std::vector<Example>& target, double l_pct, std::uint64_t seed,
                         std::optional<std::size_t> max_per_class) {
  if (!(l_pct >= 0.0 && l_pct <= 100.0)) throw ConfigError("split_target: L% must lie in [0, 100]");
  std::vector<std::size_t> order(target.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  TargetSplit out;
  const std::size_t n_train = target.size() / 2;
  std::vector<Example> train;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? train : out.test).push_back(target[order[i]]);
  }

  int max_label = -1;
  for (const Example& e : target) max_label = std::max(max_label, e.y);
  std::vector<std::size_t> counts(static_cast<std::size_t>(max_label + 1), 0);
  for (const Example& e : train) ++counts[static_cast<std::size_t>(e.y)];
  std::vector<std::size_t> quota = labeled_allocation(counts, l_pct, max_per_class, &out.warnings);

  for (const Example& e : train) {
    auto& q = quota[static_cast<std::size_t>(e.y)];
    if (q > 0) {
      out.labeled.push_back(e);
      --q;
    }
    Example hidden = e;
    hidden.y = kHiddenLabel;
    out.unlabeled.push_back(std::move(hidden));
  }
  return out;
}

namespace {

double log_gaussian(const std::vector<double>& x, const GaussianComponent& c) {
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - c.mean[i];
    sq += d * d;
  }
  const double var = c.stddev * c.stddev;
  return -0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi * var) - sq / (2.0 * var);
}

}  // namespace

double log_joint_density(const ScenarioSpec& spec, const std::vector<double>& x, int y) {
  spec.validate();
  if (y < 0 || static_cast<std::size_t>(y) >= spec.num_classes) {
    throw DomainError("log_joint_density: class " + std::to_string(y) + " out of range");
  }
  if (x.size() != spec.input_dim()) throw ShapeError("log_joint_density: point dimension mismatch");
  const auto& comps = spec.components[static_cast<std::size_t>(y)];
  double wsum = 0.0;
  for (const auto& c : comps) wsum += c.weight;
  std::vector<double> terms;
  for (const auto& c : comps) terms.push_back(std::log(c.weight / wsum) + log_gaussian(x, c));
  const double mx = *std::max_element(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += std::exp(t - mx);
  return std::log(spec.class_prior(static_cast<std::size_t>(y))) + mx + std::log(s);
}

double analytic_density_ratio(const ScenarioSpec& target, const ScenarioSpec& source, const std::vector<double>& x,
                              int y) {
  const double lt = log_joint_density(target, x, y);
  const double ls = log_joint_density(source, x, y);
  const double floor = std::log(1e-300);
  if (lt <= floor || ls <= floor) {
    throw DomainError("analytic_density_ratio: density underflow, ratio undefined");
  }
  return std::exp(lt - ls);
}

DomainSetup DomainSetup::standard() {
  DomainSetup s;
  s.target_spec = ring_scenario(3, 2.0, 1.0, 0.0, {0.0, 0.0});
  s.source_spec = ring_scenario(3, 2.0, 1.0, 10.0, {0.3, 0.0});
  s.target_spec.prior = {0.6, 0.25, 0.15};
  s.source_spec.prior = s.target_spec.prior;
  return s;
}

DomainData make_domain_data(const DomainSetup& setup, double eps_x, double eps_y, double l_pct, std::uint64_t seed) {
  if (setup.source_spec.num_classes != setup.target_spec.num_classes ||
      setup.source_spec.input_dim() != setup.target_spec.input_dim()) {
    throw ConfigError("source and target scenarios must share class count and input dimension");
  }
  DomainData d;
  d.seed = seed;
  d.num_classes = setup.target_spec.num_classes;
  const auto target = sample_scenario(setup.target_spec, setup.n_target, derive_seed(seed, streams::target));
  TargetSplit split = split_target(target, l_pct, derive_seed(seed, streams::split), setup.max_labeled_per_class);
  d.target_labeled = std::move(split.labeled);
  d.target_unlabeled = std::move(split.unlabeled);
  d.target_test = std::move(split.test);
  d.warnings = std::move(split.warnings);
  const auto clean = sample_scenario(setup.source_spec, setup.n_source, derive_seed(seed, streams::source));
  d.source = perturb_source(clean, PerturbationConfig{eps_x, eps_y, derive_seed(seed, streams::perturb)},
                            setup.source_spec);
  return d;
}

Tensor inputs_of(const std::vector<Example>& xs) {
  if (xs.empty()) throw ShapeError("inputs_of: empty example list");
  const std::size_t d = xs.front().x.size();
  Tensor t = Tensor::zeros(xs.size(), d);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i].x.size() != d) throw ShapeError("inputs_of: ragged inputs");
    std::copy(xs[i].x.begin(), xs[i].x.end(), &t(i, 0));
  }
  return t;
}

std::vector<int> labels_of(const std::vector<Example>& xs) {
  std::vector<int> ys;
  ys.reserve(xs.size());
  for (const Example& e : xs) ys.push_back(e.y);
  return ys;
}

}  // namespace ntlab
