#include "ntlab/training.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ntlab/errors.hpp"
#include "ntlab/rng.hpp"

namespace ntlab {

std::vector<std::string> TrainConfig::violations() const {
  std::vector<std::string> out;
  auto need = [&](bool ok, const char* field, const char* rule) {
    if (!ok) out.push_back(std::string("train.") + field + " " + rule);
  };
  need(lambda >= 0.0 && std::isfinite(lambda), "lambda", "must be >= 0");
  need(mu_max >= 0.0 && std::isfinite(mu_max), "mu_max", "must be >= 0");
  need(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate", "must be > 0");
  need(source_batch > 0, "source_batch", "must be > 0");
  need(unlabeled_batch > 0, "unlabeled_batch", "must be > 0");
  need(labeled_batch > 0, "labeled_batch", "must be > 0");
  need(beta1 >= 0.0 && beta1 < 1.0, "beta1", "must lie in [0, 1)");
  need(beta2 >= 0.0 && beta2 < 1.0, "beta2", "must lie in [0, 1)");
  need(adam_eps > 0.0, "adam_eps", "must be > 0");
  need(omega_clamp > 0.0 && omega_clamp < 0.5, "omega_clamp", "must lie in (0, 0.5)");
  need(gate_warmup >= 0.0 && gate_warmup <= 1.0, "gate_warmup", "must lie in [0, 1]");
  need(log_interval > 0, "log_interval", "must be > 0");
  need(hidden > 0, "hidden", "must be > 0");
  need(feature_dim > 0, "feature_dim", "must be > 0");
  need(disc_hidden > 0, "disc_hidden", "must be > 0");
  return out;
}

void TrainConfig::validate() const {
  const std::vector<std::string> v = violations();
  if (!v.empty()) throw ConfigError(v.front());
}

Adam::Adam(std::vector<ad::Parameter*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (ad::Parameter* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto w = params_[k]->value.data();
    auto g = params_[k]->grad.data();
    auto m = m_[k].data();
    auto v = v_[k].data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

double mu_schedule(double p, double mu_max, std::vector<std::string>* warnings) {
  if (p < 0.0 || p > 1.0 || std::isnan(p)) {
    if (warnings) warnings->push_back("mu_schedule: progress " + std::to_string(p) + " clamped to [0, 1]");
    p = std::isnan(p) ? 0.0 : std::clamp(p, 0.0, 1.0);
  }
  return mu_max * (2.0 / (1.0 + std::exp(-10.0 * p)) - 1.0);
}

namespace {

LabeledBatch draw_labeled(const std::vector<Example>& pool, std::size_t size, std::mt19937_64& rng) {
  LabeledBatch b;
  if (pool.empty()) return b;
  const std::size_t n = std::min(size, pool.size());
  const std::size_t d = pool.front().x.size();
  b.x = Tensor::zeros(n, d);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const Example& e = pool[pick(rng)];
    std::copy(e.x.begin(), e.x.end(), &b.x(i, 0));
    b.y.push_back(e.y);
    b.perturbed.push_back(e.perturbed());
  }
  return b;
}

Tensor draw_inputs(const std::vector<Example>& pool, std::size_t size, std::mt19937_64& rng) {
  if (pool.empty()) return {};
  const std::size_t n = std::min(size, pool.size());
  Tensor x = Tensor::zeros(n, pool.front().x.size());
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const Example& e = pool[pick(rng)];
    std::copy(e.x.begin(), e.x.end(), &x(i, 0));
  }
  return x;
}

double accuracy(const ModelTriple& m, const std::vector<Example>& xs) {
  const std::vector<int> pred = predict(m, inputs_of(xs));
  std::size_t hit = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) hit += pred[i] == xs[i].y ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(xs.size());
}

std::size_t input_dim_of(const DomainData& d) {
  for (const auto* set : {&d.target_unlabeled, &d.source, &d.target_labeled, &d.target_test}) {
    if (!set->empty()) return set->front().x.size();
  }
  throw ConfigError("train: no examples to infer the input dimension from");
}

struct IntervalAccumulator {
  double clf = 0.0, adv = 0.0;
  double omega_p = 0.0, omega_c = 0.0;
  std::size_t n_p = 0, n_c = 0, steps = 0;

  void add(const LossBundle& lb, const LabeledBatch& source) {
    clf += lb.clf_loss;
    adv += lb.adv_loss;
    ++steps;
    for (std::size_t i = 0; i < lb.omegas.size(); ++i) {
      if (source.perturbed[i]) {
        omega_p += lb.omegas[i].omega;
        ++n_p;
      } else {
        omega_c += lb.omegas[i].omega;
        ++n_c;
      }
    }
  }
};

}  // namespace

TrainResult train(const DomainData& data, const TrainConfig& cfg, Variant variant) {
  cfg.validate();
  if (data.num_classes == 0) throw ConfigError("train: data.num_classes must be positive");

  // Role assignment per variant.
  std::vector<Example> source = data.source;
  std::vector<Example> labeled = data.target_labeled;
  const bool target_only = variant == Variant::target_only || variant == Variant::source_ignoring_stub;
  if (target_only) {
    source = data.target_labeled;
    labeled.clear();
  } else if (variant == Variant::oracle) {
    std::erase_if(source, [](const Example& e) { return e.perturbed(); });
  }
  const Variant wiring_variant = target_only ? Variant::target_only : variant;

  if (data.target_unlabeled.empty()) {
    throw ConfigError("train: missing term target-unlabeled adversarial (no unlabeled target data)");
  }
  if (!target_only && source.empty()) {
    throw ConfigError(std::string("train: variant ") + std::string(to_string(variant)) +
                      " is missing the source classification term (empty source set)");
  }

  TrainResult result;
  result.model = ModelTriple::init(cfg.dims(input_dim_of(data), data.num_classes), derive_seed(cfg.seed, streams::init));
  ModelTriple& m = result.model;
  Adam opt(m.parameters(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);

  std::mt19937_64 source_rng(derive_seed(cfg.seed, streams::source_batch));
  std::mt19937_64 unlabeled_rng(derive_seed(cfg.seed, streams::unlabeled_batch));
  std::mt19937_64 labeled_rng(derive_seed(cfg.seed, streams::labeled_batch));

  const bool gate_available = !labeled.empty();
  if (wiring_for(wiring_variant).gated && !gate_available) {
    result.history.warnings.push_back("no labeled target data: gate weights fixed at 1");
  }
  const auto warmup_steps = static_cast<std::size_t>(std::ceil(cfg.gate_warmup * static_cast<double>(cfg.steps)));
  IntervalAccumulator acc;

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const double progress = static_cast<double>(step) / static_cast<double>(cfg.steps);
    ObjectiveOptions opts;
    opts.mu = mu_schedule(progress, cfg.mu_max);
    opts.lambda = cfg.lambda;
    opts.omega_clamp = cfg.omega_clamp;
    opts.gate_enabled = gate_available && step >= warmup_steps;

    Batches b;
    b.source = draw_labeled(source, target_only ? cfg.labeled_batch : cfg.source_batch, source_rng);
    b.target_unlabeled = draw_inputs(data.target_unlabeled, cfg.unlabeled_batch, unlabeled_rng);
    b.target_labeled = draw_labeled(labeled, cfg.labeled_batch, labeled_rng);

    ad::Graph g;
    LossBundle lb = total_objective(g, m, b, wiring_variant, opts);
    m.zero_grad();
    g.backward(lb.objective);
    opt.step();

    acc.add(lb, b.source);
    if ((step + 1) % cfg.log_interval == 0) {
      HistoryRecord r;
      r.step = step + 1;
      r.mu = opts.mu;
      r.clf_loss = acc.clf / static_cast<double>(acc.steps);
      r.adv_loss = acc.adv / static_cast<double>(acc.steps);
      if (acc.n_p) r.mean_omega_perturbed = acc.omega_p / static_cast<double>(acc.n_p);
      if (acc.n_c) r.mean_omega_clean = acc.omega_c / static_cast<double>(acc.n_c);
      if (!data.target_labeled.empty()) r.labeled_target_accuracy = accuracy(m, data.target_labeled);
      result.history.records.push_back(r);
      acc = {};
    }
  }
  return result;
}

TrainResult run_algorithm(const std::optional<std::vector<Example>>& source, const TargetData& target,
                          const TrainConfig& cfg, Variant variant) {
  DomainData d;
  d.target_labeled = target.labeled;
  d.target_unlabeled = target.unlabeled;
  d.num_classes = target.num_classes;
  d.seed = cfg.seed;
  if (!source || source->empty()) {
    if (variant != Variant::target_only && variant != Variant::source_ignoring_stub) {
      throw ConfigError(std::string("run_algorithm: variant ") + std::string(to_string(variant)) +
                        " requires source data");
    }
    return train(d, cfg, Variant::target_only);
  }
  d.source = *source;
  return train(d, cfg, variant);
}

ModelTriple fit_density_ratio(const std::vector<Example>& target, const std::vector<Example>& source,
                              std::size_t num_classes, const RatioFitConfig& cfg) {
  if (target.empty() || source.empty()) throw ConfigError("fit_density_ratio: both samples must be non-empty");
  if (cfg.steps == 0 || cfg.batch == 0 || !(cfg.learning_rate > 0.0)) {
    throw ConfigError("fit_density_ratio: steps, batch and learning_rate must be positive");
  }
  const ModelDims dims{target.front().x.size(), cfg.hidden, cfg.feature_dim, cfg.disc_hidden, num_classes};
  ModelTriple m = ModelTriple::init(dims, derive_seed(cfg.seed, streams::init));
  std::vector<ad::Parameter*> params = {&m.F.l1.weight, &m.F.l1.bias,     &m.F.l2.weight, &m.F.l2.bias,
                                        &m.F.l3.weight, &m.F.l3.bias,     &m.D.hidden.weight,
                                        &m.D.hidden.bias, &m.D.out.weight, &m.D.out.bias};
  Adam opt(params, cfg.learning_rate);
  std::mt19937_64 source_rng(derive_seed(cfg.seed, streams::source_batch));
  std::mt19937_64 target_rng(derive_seed(cfg.seed, streams::labeled_batch));
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    if (cfg.anneal) {
      opt.set_learning_rate(cfg.learning_rate * (1.0 - static_cast<double>(step) / static_cast<double>(cfg.steps)));
    }
    Batches b;
    b.source = draw_labeled(source, cfg.batch, source_rng);
    b.target_labeled = draw_labeled(target, cfg.batch, target_rng);
    ad::Graph g;
    const Embedded e = embed(g, m.F, b);
    ad::Var value = adversarial_loss(g, m.D, e, b, AdvTerms::joint());
    m.zero_grad();
    g.backward(ad::scale(value, -1.0));
    opt.step();
  }
  return m;
}

}  // namespace ntlab
