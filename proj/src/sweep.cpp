#include "ntlab/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include "ntlab/errors.hpp"
#include "ntlab/persistence.hpp"
#include "text_util.hpp"

namespace ntlab {

std::vector<RowSpec> expand_grid(const GridSpec& grid, std::uint64_t seed_offset) {
  std::vector<RowSpec> rows;
  rows.reserve(grid.seeds.size() * grid.eps.size() * grid.l_pct.size() * grid.variants.size());
  for (std::uint64_t seed : grid.seeds)
    for (double eps : grid.eps)
      for (double l : grid.l_pct)
        for (Variant v : grid.variants) rows.push_back({seed + seed_offset, eps, eps, l, v});
  return rows;
}

std::string format_number(double v) { return text::shortest(v); }

namespace {

std::string opt_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

std::optional<double> parse_opt(const std::string& s, const std::string& what) {
  if (s.empty()) return std::nullopt;
  return text::to_double(s, what);
}

// Keeps a failure reason inside one CSV field.
std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

}  // namespace

std::string format_row(const ResultRow& r, bool with_wall_seconds) {
  std::string s = std::to_string(r.spec.seed) + ',' + format_number(r.spec.eps_x) + ',' + format_number(r.spec.eps_y) +
                  ',' + format_number(r.spec.l_pct) + ',' + std::string(to_string(r.spec.variant)) + ',' +
                  opt_number(r.acc_with_source) + ',' + opt_number(r.acc_target_only) + ',' + opt_number(r.ntg) + ',' +
                  opt_number(r.mean_omega_perturbed) + ',' + opt_number(r.mean_omega_clean) + ',';
  if (with_wall_seconds) s += format_number(r.wall_seconds);
  return s + ',' + sanitize(r.status);
}

ResultRow parse_row(const std::string& line) {
  const std::vector<std::string> f = text::split_csv(line);
  if (f.size() != 12) throw ConfigError("results row: expected 12 fields, got " + std::to_string(f.size()));
  ResultRow r;
  r.spec.seed = text::to_u64(f[0], "seed");
  r.spec.eps_x = text::to_double(f[1], "eps_x");
  r.spec.eps_y = text::to_double(f[2], "eps_y");
  r.spec.l_pct = text::to_double(f[3], "l_pct");
  const auto v = parse_variant(f[4]);
  if (!v) throw ConfigError("results row: unknown variant '" + f[4] + "'");
  r.spec.variant = *v;
  r.acc_with_source = parse_opt(f[5], "acc_with_source");
  r.acc_target_only = parse_opt(f[6], "acc_target_only");
  r.ntg = parse_opt(f[7], "ntg");
  r.mean_omega_perturbed = parse_opt(f[8], "mean_omega_perturbed");
  r.mean_omega_clean = parse_opt(f[9], "mean_omega_clean");
  r.wall_seconds = f[10].empty() ? 0.0 : text::to_double(f[10], "wall_seconds");
  r.status = f[11];
  return r;
}

std::vector<ResultRow> read_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) throw ConfigError("results file '" + path + "': bad header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(parse_row(line));
  }
  return rows;
}

std::vector<AggregateRow> aggregate(const std::vector<ResultRow>& rows) {
  struct Acc {
    AggregateRow head;
    std::vector<double> with, without, ntg, wp, wc;
  };
  std::vector<Acc> groups;
  for (const ResultRow& r : rows) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Acc& a) {
      return a.head.eps_x == r.spec.eps_x && a.head.eps_y == r.spec.eps_y && a.head.l_pct == r.spec.l_pct &&
             a.head.variant == r.spec.variant;
    });
    if (it == groups.end()) {
      Acc a;
      a.head.eps_x = r.spec.eps_x;
      a.head.eps_y = r.spec.eps_y;
      a.head.l_pct = r.spec.l_pct;
      a.head.variant = r.spec.variant;
      groups.push_back(std::move(a));
      it = std::prev(groups.end());
    }
    if (!r.ok()) {
      ++it->head.n_failed;
      continue;
    }
    ++it->head.n_ok;
    it->with.push_back(*r.acc_with_source);
    it->without.push_back(*r.acc_target_only);
    it->ntg.push_back(*r.ntg);
    if (r.mean_omega_perturbed) it->wp.push_back(*r.mean_omega_perturbed);
    if (r.mean_omega_clean) it->wc.push_back(*r.mean_omega_clean);
  }
  std::vector<AggregateRow> out;
  for (Acc& a : groups) {
    a.head.acc_with_source = summarize(a.with);
    a.head.acc_target_only = summarize(a.without);
    a.head.ntg = summarize(a.ntg);
    if (!a.wp.empty()) a.head.mean_omega_perturbed = summarize(a.wp).mean;
    if (!a.wc.empty()) a.head.mean_omega_clean = summarize(a.wc).mean;
    out.push_back(a.head);
  }
  return out;
}

std::string format_aggregate_row(const AggregateRow& a) {
  auto stat = [&](const SeedSummary& s) {
    return a.n_ok ? format_number(s.mean) + ',' + format_number(s.stddev) : std::string(",");
  };
  return format_number(a.eps_x) + ',' + format_number(a.eps_y) + ',' + format_number(a.l_pct) + ',' +
         std::string(to_string(a.variant)) + ',' + std::to_string(a.n_ok) + ',' + std::to_string(a.n_failed) + ',' +
         stat(a.acc_with_source) + ',' + stat(a.acc_target_only) + ',' + stat(a.ntg) + ',' +
         opt_number(a.mean_omega_perturbed) + ',' + opt_number(a.mean_omega_clean);
}

struct BaselineCache::Impl {
  DomainSetup setup;
  TrainConfig cfg;
  std::mutex mu;
  std::map<std::pair<std::uint64_t, double>, std::shared_future<RiskEstimate>> entries;
};

BaselineCache::BaselineCache(DomainSetup setup, TrainConfig cfg) : impl_(new Impl{std::move(setup), cfg, {}, {}}) {}
BaselineCache::~BaselineCache() { delete impl_; }

RiskEstimate BaselineCache::get(std::uint64_t seed, double l_pct) {
  std::promise<RiskEstimate> promise;
  std::shared_future<RiskEstimate> future;
  bool owner = false;
  {
    std::lock_guard lock(impl_->mu);
    auto [it, inserted] = impl_->entries.try_emplace({seed, l_pct});
    if (inserted) {
      it->second = promise.get_future().share();
      owner = true;
    }
    future = it->second;
  }
  if (owner) {
    try {
      const DomainData data = make_domain_data(impl_->setup, 0.0, 0.0, l_pct, seed);
      TrainConfig cfg = impl_->cfg;
      cfg.seed = seed;
      const TargetData t{data.target_labeled, data.target_unlabeled, data.num_classes};
      const TrainResult r = run_algorithm(std::nullopt, t, cfg, Variant::target_only);
      promise.set_value(expected_risk(r.model, data.target_test));
    } catch (...) {
      promise.set_exception(std::current_exception());
    }
  }
  return future.get();
}

ResultRow run_row(const DomainSetup& setup, const TrainConfig& cfg, const RowSpec& spec, BaselineCache& baselines,
                  const ModelHook& hook) {
  ResultRow row;
  row.spec = spec;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const DomainData data = make_domain_data(setup, spec.eps_x, spec.eps_y, spec.l_pct, spec.seed);
    TrainConfig c = cfg;
    c.seed = spec.seed;
    const TargetData t{data.target_labeled, data.target_unlabeled, data.num_classes};
    const TrainResult trained = run_algorithm(data.source, t, c, spec.variant);
    const RiskEstimate with = expected_risk(trained.model, data.target_test);
    const RiskEstimate without = baselines.get(spec.seed, spec.l_pct);
    const NTGReport report = make_report(with, without, spec.variant);
    row.acc_with_source = 1.0 - with.risk;
    row.acc_target_only = 1.0 - without.risk;
    row.ntg = *row.acc_target_only - *row.acc_with_source;
    if (std::abs(*row.ntg - report.ntg) > 1e-12) throw ContractError("NTG from accuracies disagrees with the risk gap");
    const bool uses_source = spec.variant != Variant::target_only && spec.variant != Variant::source_ignoring_stub;
    if (uses_source) {
      const WeightStats w = weight_stats(trained.model.D, trained.model.F, data.source, cfg.omega_clamp);
      row.mean_omega_perturbed = w.mean_omega_perturbed;
      row.mean_omega_clean = w.mean_omega_clean;
    }
    if (hook) hook(spec, trained.model, data);
  } catch (const std::exception& e) {
    row = ResultRow{};
    row.spec = spec;
    row.status = std::string("failed: ") + e.what();
  }
  row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

std::vector<ResultRow> run_sweep(const DomainSetup& setup, const TrainConfig& cfg, const std::vector<RowSpec>& rows,
                                 const SweepOptions& opts, const std::function<void(const ResultRow&)>& sink) {
  BaselineCache baselines(setup, cfg);
  std::vector<std::optional<ResultRow>> done(rows.size());
  std::atomic<std::size_t> next{0};
  std::mutex write_mu;
  std::size_t written = 0;

  auto worker = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      ResultRow r = run_row(setup, cfg, rows[i], baselines, opts.on_model);
      std::lock_guard lock(write_mu);
      done[i] = std::move(r);
      while (written < rows.size() && done[written]) {
        if (sink) sink(*done[written]);
        ++written;
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(opts.jobs, rows.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  std::vector<ResultRow> out;
  out.reserve(rows.size());
  for (auto& r : done) out.push_back(std::move(*r));
  return out;
}

namespace {

std::string row_tag(const RowSpec& s) {
  return "s" + std::to_string(s.seed) + "_eps" + format_number(s.eps_x) + "_L" + format_number(s.l_pct);
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log) {
  const ValidationReport report = validate(cfg);
  if (!report.ok()) {
    for (const Violation& v : report.violations) log << "error: " << v.path << ": " << v.message << '\n';
    return kExitConfigError;
  }
  namespace fs = std::filesystem;
  const fs::path dir = opts.out_dir.empty() ? fs::path(cfg.output_dir) : fs::path(opts.out_dir);
  fs::create_directories(dir);
  {
    std::ofstream cj(dir / "config.json", std::ios::trunc);
    cj << to_json(cfg).dump(2) << '\n';
  }

  const DomainSetup setup = cfg.scenario.setup();
  const std::vector<RowSpec> rows = expand_grid(cfg.grid, opts.seed_offset);
  const std::string hash = config_hash(cfg);

  SweepOptions sweep;
  sweep.jobs = opts.jobs;
  std::mutex dataset_mu;
  if (opts.save_checkpoints) {
    fs::create_directories(dir / "checkpoints");
    fs::create_directories(dir / "datasets");
    sweep.on_model = [&](const RowSpec& s, const ModelTriple& m, const DomainData& d) {
      const std::string tag = row_tag(s);
      save_checkpoint((dir / "checkpoints" / (tag + "_" + std::string(to_string(s.variant)) + ".json")).string(), m,
                      CheckpointMeta{s.seed, s.variant, hash, s.eps_x, s.eps_y, s.l_pct});
      const fs::path ds = dir / "datasets" / (tag + ".csv");
      std::lock_guard lock(dataset_mu);
      if (!fs::exists(ds)) save_dataset(ds.string(), d);
    };
  }

  std::ofstream results(dir / "results.csv", std::ios::trunc);
  results << kResultsHeader << '\n' << std::flush;
  std::size_t n_done = 0, n_failed = 0;
  const std::vector<ResultRow> out = run_sweep(setup, cfg.train, rows, sweep, [&](const ResultRow& r) {
    results << format_row(r) << '\n' << std::flush;
    ++n_done;
    if (!r.ok()) {
      ++n_failed;
      log << "row " << n_done << "/" << rows.size() << " " << r.status << '\n';
    }
  });

  std::ofstream agg(dir / "aggregate.csv", std::ios::trunc);
  agg << kAggregateHeader << '\n';
  for (const AggregateRow& a : aggregate(out)) agg << format_aggregate_row(a) << '\n';

  log << rows.size() << " rows, " << n_failed << " failed; results in " << (dir / "results.csv").string() << '\n';
  return !rows.empty() && n_failed == rows.size() ? kExitAllFailed : kExitOk;
}

}  // namespace ntlab
