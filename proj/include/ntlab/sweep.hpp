#pragma once

// Experiment sweeps: one result row per (seed, eps, L%, variant), run in
// parallel, written in grid order by a single writer.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ntlab/config.hpp"
#include "ntlab/evaluation.hpp"

namespace ntlab {

inline constexpr const char* kResultsHeader =
    "seed,eps_x,eps_y,l_pct,variant,acc_with_source,acc_target_only,ntg,mean_omega_perturbed,mean_omega_clean,"
    "wall_seconds,status";
inline constexpr const char* kAggregateHeader =
    "eps_x,eps_y,l_pct,variant,n_ok,n_failed,acc_with_source_mean,acc_with_source_std,acc_target_only_mean,"
    "acc_target_only_std,ntg_mean,ntg_std,mean_omega_perturbed_mean,mean_omega_clean_mean";

struct RowSpec {
  std::uint64_t seed = 0;
  double eps_x = 0.0;
  double eps_y = 0.0;
  double l_pct = 0.0;
  Variant variant = Variant::base;

  friend bool operator==(const RowSpec&, const RowSpec&) = default;
};

struct ResultRow {
  RowSpec spec;
  std::optional<double> acc_with_source;
  std::optional<double> acc_target_only;
  std::optional<double> ntg;  // acc_target_only - acc_with_source
  std::optional<double> mean_omega_perturbed;
  std::optional<double> mean_omega_clean;
  double wall_seconds = 0.0;
  std::string status = "ok";  // "ok" or "failed: <reason>"

  bool ok() const { return status == "ok"; }
};

/// Grid order: seed, then eps, then L%, then variant (innermost).
std::vector<RowSpec> expand_grid(const GridSpec& grid, std::uint64_t seed_offset = 0);

/// Shortest text that reads back as the same double.
std::string format_number(double v);
std::string format_row(const ResultRow& row, bool with_wall_seconds = true);
/// Inverse of format_row. Throws ConfigError on a malformed line.
ResultRow parse_row(const std::string& line);
std::vector<ResultRow> read_results(const std::string& path);

struct AggregateRow {
  double eps_x = 0.0, eps_y = 0.0, l_pct = 0.0;
  Variant variant = Variant::base;
  std::size_t n_ok = 0, n_failed = 0;
  SeedSummary acc_with_source, acc_target_only, ntg;
  std::optional<double> mean_omega_perturbed, mean_omega_clean;
};

/// Groups ok rows by (eps_x, eps_y, l_pct, variant) in first-appearance order.
std::vector<AggregateRow> aggregate(const std::vector<ResultRow>& rows);
std::string format_aggregate_row(const AggregateRow& a);

/// Target-only risk per (seed, L%), computed once and shared across threads.
/// The target data only depends on (seed, L%), so eps never enters the key.
class BaselineCache {
 public:
  BaselineCache(DomainSetup setup, TrainConfig cfg);
  ~BaselineCache();
  BaselineCache(const BaselineCache&) = delete;
  BaselineCache& operator=(const BaselineCache&) = delete;

  RiskEstimate get(std::uint64_t seed, double l_pct);

 private:
  struct Impl;
  Impl* impl_;
};

/// Called after each successful row with the trained model and its data.
using ModelHook = std::function<void(const RowSpec&, const ModelTriple&, const DomainData&)>;

/// Trains one row and pairs it with the cached baseline. Exceptions become a
/// failed row; they never propagate.
ResultRow run_row(const DomainSetup& setup, const TrainConfig& cfg, const RowSpec& spec, BaselineCache& baselines,
                  const ModelHook& hook = {});

struct SweepOptions {
  std::size_t jobs = 1;
  ModelHook on_model;
};

/// Runs every row; `sink` sees rows strictly in input order, one at a time.
std::vector<ResultRow> run_sweep(const DomainSetup& setup, const TrainConfig& cfg, const std::vector<RowSpec>& rows,
                                 const SweepOptions& opts, const std::function<void(const ResultRow&)>& sink = {});

enum ExitCode : int { kExitOk = 0, kExitConfigError = 1, kExitAllFailed = 2 };

struct RunOptions {
  std::string out_dir;  // empty means config.output_dir
  std::size_t jobs = 1;
  std::uint64_t seed_offset = 0;
  bool save_checkpoints = false;
};

/// Writes results.csv (row by row), aggregate.csv and config.json into the
/// output directory; with save_checkpoints also one checkpoint per row and
/// one dataset per (seed, eps, L%). Violations are printed to `log` and give
/// kExitConfigError; warnings are left to the caller. Returns the process exit code.
int run_experiment(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log);

}  // namespace ntlab
