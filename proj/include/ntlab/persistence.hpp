#pragma once

// Checkpoints (JSON), dataset tables and feature exports (CSV).

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "ntlab/domains.hpp"
#include "ntlab/networks.hpp"
#include "ntlab/variant.hpp"

namespace ntlab {

inline constexpr const char* kDatasetHeader = "split,x0,x1,y,perturbed_x,perturbed_y";

struct CheckpointMeta {
  std::uint64_t seed = 0;
  Variant variant = Variant::base;
  std::string config_hash;
  double eps_x = 0.0, eps_y = 0.0, l_pct = 0.0;
};

struct Checkpoint {
  ModelTriple model;
  CheckpointMeta meta;
};

/// {"format", "metadata", "dims", "layers": [{"name", "shape", "values"}]}.
nlohmann::json checkpoint_to_json(const ModelTriple& model, const CheckpointMeta& meta);
/// Throws ConfigError on a malformed document, ShapeError when a layer shape
/// disagrees with the stored dims.
Checkpoint checkpoint_from_json(const nlohmann::json& doc);
void save_checkpoint(const std::string& path, const ModelTriple& model, const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::string& path);

/// Header for a given input dimension: split,x0..x{d-1},y,perturbed_x,perturbed_y.
std::string dataset_header(std::size_t input_dim);
/// Splits are written as source, target_labeled, target_unlabeled, target_test.
/// Hidden labels are written as an empty field.
void save_dataset(const std::string& path, const DomainData& data);
/// num_classes is one past the largest label present. Throws ConfigError on a
/// malformed table.
DomainData load_dataset(const std::string& path);

/// domain,class,perturbed_x,perturbed_y,omega,f0..f{d_f-1}.
std::string feature_header(std::size_t feature_dim);

/// One row per example: source rows carry the gate weight, target rows leave
/// omega empty. Source comes first, then labeled, unlabeled and test target.
/// Throws ShapeError when the model and data disagree on input dimension or
/// class count. Returns the number of rows written.
std::size_t export_features(const ModelTriple& model, const DomainData& data, const std::string& out_path);
std::size_t export_features(const std::string& checkpoint_path, const std::string& dataset_path,
                            const std::string& out_path);

}  // namespace ntlab
