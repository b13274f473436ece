// ntlab: run, validate and inspect negative-transfer experiments.

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ntlab/config.hpp"
#include "ntlab/persistence.hpp"
#include "ntlab/sweep.hpp"

namespace {

struct RunFlags {
  std::string config;
  std::string out;
  std::size_t jobs = 1;
  std::uint64_t seed_offset = 0;
  bool checkpoints = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f, bool config_required) {
  auto* c = cmd->add_option("--config", f.config, "experiment config (JSON)");
  if (config_required) c->required();
  cmd->add_option("--out", f.out, "output directory (default: output_dir from the config)");
  cmd->add_option("--jobs", f.jobs, "concurrent training runs")->check(CLI::PositiveNumber);
  cmd->add_option("--seed-offset", f.seed_offset, "added to every seed in the grid");
  cmd->add_flag("--checkpoints", f.checkpoints, "save a checkpoint per row and a dataset per cell");
}

void print_report(const ntlab::ValidationReport& r, std::ostream& os) {
  for (const std::string& w : r.warnings) os << "warning: " << w << '\n';
  for (const ntlab::Violation& v : r.violations) os << "error: " << v.path << ": " << v.message << '\n';
}

// Loads the config (or defaults when no path is given) with an optional preset grid.
std::optional<ntlab::ExperimentConfig> load(const RunFlags& f, const ntlab::GridSpec* preset) {
  ntlab::ParseResult p;
  try {
    p = f.config.empty() ? ntlab::parse_config("{}", preset) : ntlab::load_config(f.config, preset);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return std::nullopt;
  }
  print_report(p.report, std::cerr);
  if (!p.report.ok()) return std::nullopt;
  return p.config;
}

int run(const RunFlags& f, const ntlab::GridSpec* preset) {
  const auto cfg = load(f, preset);
  if (!cfg) return ntlab::kExitConfigError;
  ntlab::RunOptions opts;
  opts.out_dir = f.out;
  opts.jobs = f.jobs;
  opts.seed_offset = f.seed_offset;
  opts.save_checkpoints = f.checkpoints;
  try {
    return ntlab::run_experiment(*cfg, opts, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ntlab::kExitAllFailed;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Negative transfer experiments with discriminator-gated DANN"};
  app.require_subcommand(1);

  RunFlags run_flags, table_flags, ablate_flags;
  auto* run_cmd = app.add_subcommand("run", "run the grid described by a config");
  add_run_flags(run_cmd, run_flags, true);
  auto* table_cmd = app.add_subcommand("sweep-table1", "eps x L% grid for base and gate");
  add_run_flags(table_cmd, table_flags, false);
  auto* ablate_cmd = app.add_subcommand("ablate", "ablation grid over every variant");
  add_run_flags(ablate_cmd, ablate_flags, false);

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "list config problems without running anything");
  validate_cmd->add_option("--config", validate_path, "experiment config (JSON)")->required();

  std::string checkpoint, dataset, features_out;
  auto* export_cmd = app.add_subcommand("export-features", "per-example features and gate weights");
  export_cmd->add_option("--checkpoint", checkpoint, "checkpoint written by run --checkpoints")->required();
  export_cmd->add_option("--dataset", dataset, "dataset table written by run --checkpoints")->required();
  export_cmd->add_option("--out", features_out, "output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  if (*run_cmd) return run(run_flags, nullptr);
  if (*table_cmd) {
    const ntlab::GridSpec g = ntlab::table1_grid();
    return run(table_flags, &g);
  }
  if (*ablate_cmd) {
    const ntlab::GridSpec g = ntlab::ablation_grid();
    return run(ablate_flags, &g);
  }
  if (*validate_cmd) {
    ntlab::ParseResult p;
    try {
      p = ntlab::load_config(validate_path);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return ntlab::kExitConfigError;
    }
    print_report(p.report, std::cout);
    if (p.report.ok()) std::cout << "ok: no violations\n";
    return p.report.ok() ? ntlab::kExitOk : ntlab::kExitConfigError;
  }
  if (*export_cmd) {
    try {
      const std::size_t n = ntlab::export_features(checkpoint, dataset, features_out);
      std::cout << n << " rows written to " << features_out << '\n';
      return ntlab::kExitOk;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return ntlab::kExitConfigError;
    }
  }
  return ntlab::kExitOk;
}
