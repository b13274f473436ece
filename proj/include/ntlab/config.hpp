#pragma once

// Experiment configuration: a JSON document with scenario, grid, train and
// output sections, plus non-throwing validation that lists every problem.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ntlab/domains.hpp"
#include "ntlab/training.hpp"
#include "ntlab/variant.hpp"

namespace ntlab {

/// Ring scenario parameters shared by source and target; the source copy is
/// rotated and shifted.
struct ScenarioParams {
  std::size_t num_classes = 3;
  double radius = 2.0;
  double stddev = 1.0;
  std::vector<double> prior = {0.6, 0.25, 0.15};
  double source_rotation_deg = 10.0;
  std::vector<double> source_offset = {0.3, 0.0};
  double noise_stddev = 3.0;
  double noise_flip_prob = 0.5;
  std::size_t n_source = 2000;
  std::size_t n_target = 400;
  std::optional<std::size_t> max_labeled_per_class;

  DomainSetup setup() const;
};

struct GridSpec {
  std::vector<double> eps = {0.0, 0.3, 0.7, 0.9};  // eps_x = eps_y = eps
  std::vector<double> l_pct = {0.0, 10.0, 30.0, 50.0};
  std::vector<Variant> variants = {Variant::base, Variant::gate};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
};

/// eps {0, 0.3, 0.7, 0.9} x L% {0, 10, 30, 50} x {base, gate} x seeds 1..5.
GridSpec table1_grid();
/// eps {0.7, 0.3} x L% {30, 10} x every DANN-family variant x seeds 1..5.
GridSpec ablation_grid();

struct ExperimentConfig {
  ScenarioParams scenario;
  GridSpec grid;
  TrainConfig train;
  std::string output_dir = "results";
};

struct Violation {
  std::string path;  // e.g. "grid.eps[2]"
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::vector<std::string> warnings;
  bool ok() const { return violations.empty(); }
};

/// Structural and range checks on a parsed config.
ValidationReport validate(const ExperimentConfig& cfg);

/// Reads a JSON document into a config, starting from defaults. Unknown keys
/// become warnings; type mismatches and syntax errors become violations (with
/// line and column for syntax errors). Range checks from validate() are merged in.
struct ParseResult {
  ExperimentConfig config;
  ValidationReport report;
};
/// A non-null grid_override replaces the document's grid before range checks.
ParseResult parse_config(const std::string& text, const GridSpec* grid_override = nullptr);
/// Throws std::runtime_error when the file cannot be read.
ParseResult load_config(const std::string& path, const GridSpec* grid_override = nullptr);

nlohmann::json to_json(const ExperimentConfig& cfg);
/// 64-bit FNV-1a of the canonical JSON dump (output_dir excluded), as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace ntlab
