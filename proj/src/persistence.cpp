#include "ntlab/persistence.hpp"

#include <fstream>
#include <sstream>

#include "ntlab/errors.hpp"
#include "ntlab/objectives.hpp"
#include "text_util.hpp"

namespace ntlab {

using nlohmann::json;

namespace {

constexpr const char* kCheckpointFormat = "ntlab-checkpoint-v1";

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  return in;
}

template <class T>
T field(const json& obj, const char* key, const char* where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ConfigError(std::string("checkpoint: missing field '") + key + "' in " + where);
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("checkpoint: field '") + key + "' in " + where + " has the wrong type");
  }
}

}  // namespace

json checkpoint_to_json(const ModelTriple& model, const CheckpointMeta& meta) {
  json layers = json::array();
  for (const ad::Parameter* p : model.parameters()) {
    layers.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"values", p->value.values()}});
  }
  const ModelDims& d = model.dims;
  return {{"format", kCheckpointFormat},
          {"metadata",
           {{"seed", meta.seed},
            {"variant", std::string(to_string(meta.variant))},
            {"config_hash", meta.config_hash},
            {"eps_x", meta.eps_x},
            {"eps_y", meta.eps_y},
            {"l_pct", meta.l_pct}}},
          {"dims",
           {{"input_dim", d.input_dim},
            {"hidden", d.hidden},
            {"feature_dim", d.feature_dim},
            {"disc_hidden", d.disc_hidden},
            {"num_classes", d.num_classes}}},
          {"layers", layers}};
}

Checkpoint checkpoint_from_json(const json& doc) {
  if (field<std::string>(doc, "format", "document") != kCheckpointFormat) {
    throw ConfigError("checkpoint: unsupported format tag");
  }
  Checkpoint c;
  const json& meta = doc.at("metadata");
  c.meta.seed = field<std::uint64_t>(meta, "seed", "metadata");
  const auto v = parse_variant(field<std::string>(meta, "variant", "metadata"));
  if (!v) throw ConfigError("checkpoint: unknown variant in metadata");
  c.meta.variant = *v;
  c.meta.config_hash = field<std::string>(meta, "config_hash", "metadata");
  c.meta.eps_x = field<double>(meta, "eps_x", "metadata");
  c.meta.eps_y = field<double>(meta, "eps_y", "metadata");
  c.meta.l_pct = field<double>(meta, "l_pct", "metadata");

  const json& dj = doc.at("dims");
  const ModelDims dims{field<std::size_t>(dj, "input_dim", "dims"), field<std::size_t>(dj, "hidden", "dims"),
                       field<std::size_t>(dj, "feature_dim", "dims"), field<std::size_t>(dj, "disc_hidden", "dims"),
                       field<std::size_t>(dj, "num_classes", "dims")};
  c.model = ModelTriple::zeros(dims);

  const json& layers = doc.at("layers");
  std::vector<ad::Parameter*> params = c.model.parameters();
  if (!layers.is_array() || layers.size() != params.size()) {
    throw ConfigError("checkpoint: expected " + std::to_string(params.size()) + " layers");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Parameter& p = *params[i];
    const auto name = field<std::string>(layers[i], "name", "layer");
    if (name != p.name) throw ConfigError("checkpoint: layer " + std::to_string(i) + " is '" + name + "', expected '" + p.name + "'");
    const auto shape = field<std::vector<std::size_t>>(layers[i], "shape", "layer");
    if (shape != p.value.shape()) {
      throw ShapeError("checkpoint: layer '" + name + "' has a shape that disagrees with the stored dims");
    }
    const auto values = field<std::vector<double>>(layers[i], "values", "layer");
    if (values.size() != p.value.size()) throw ShapeError("checkpoint: layer '" + name + "' has the wrong value count");
    std::copy(values.begin(), values.end(), p.value.data().begin());
  }
  return c;
}

void save_checkpoint(const std::string& path, const ModelTriple& model, const CheckpointMeta& meta) {
  std::ofstream out = open_out(path);
  out << checkpoint_to_json(model, meta).dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in = open_in(path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("checkpoint '" + path + "': " + e.what());
  }
  return checkpoint_from_json(doc);
}

std::string dataset_header(std::size_t input_dim) {
  std::string h = "split";
  for (std::size_t k = 0; k < input_dim; ++k) h += ",x" + std::to_string(k);
  return h + ",y,perturbed_x,perturbed_y";
}

void save_dataset(const std::string& path, const DomainData& data) {
  std::ofstream out = open_out(path);
  std::size_t dim = 0;
  for (const auto* set : {&data.source, &data.target_labeled, &data.target_unlabeled, &data.target_test}) {
    if (!set->empty()) {
      dim = set->front().x.size();
      break;
    }
  }
  out << dataset_header(dim) << '\n';
  auto write = [&](const char* split, const std::vector<Example>& xs) {
    for (const Example& e : xs) {
      if (e.x.size() != dim) throw ShapeError("save_dataset: examples of different dimension");
      out << split;
      for (double v : e.x) out << ',' << text::shortest(v);
      out << ',' << (e.y == kHiddenLabel ? std::string() : std::to_string(e.y)) << ',' << (e.perturbed_x ? 1 : 0)
          << ',' << (e.perturbed_y ? 1 : 0) << '\n';
    }
  };
  write("source", data.source);
  write("target_labeled", data.target_labeled);
  write("target_unlabeled", data.target_unlabeled);
  write("target_test", data.target_test);
}

DomainData load_dataset(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset '" + path + "': empty file");
  const std::vector<std::string> header = text::split_csv(line);
  if (header.size() < 5) throw ConfigError("dataset '" + path + "': header too short");
  const std::size_t dim = header.size() - 4;
  if (text::split_csv(dataset_header(dim)) != header) {
    throw ConfigError("dataset '" + path + "': unexpected header '" + line + "'");
  }
  DomainData d;
  int max_label = -1;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "dataset '" + path + "' line " + std::to_string(line_no);
    const std::vector<std::string> f = text::split_csv(line);
    if (f.size() != header.size()) throw ConfigError(where + ": expected " + std::to_string(header.size()) + " fields");
    Example e;
    for (std::size_t k = 0; k < dim; ++k) e.x.push_back(text::to_double(f[1 + k], where));
    e.y = f[1 + dim].empty() ? kHiddenLabel : static_cast<int>(text::to_u64(f[1 + dim], where));
    e.perturbed_x = text::to_flag(f[2 + dim], where);
    e.perturbed_y = text::to_flag(f[3 + dim], where);
    max_label = std::max(max_label, e.y);
    const std::string& split = f[0];
    if (split == "source") {
      d.source.push_back(std::move(e));
    } else if (split == "target_labeled") {
      d.target_labeled.push_back(std::move(e));
    } else if (split == "target_unlabeled") {
      d.target_unlabeled.push_back(std::move(e));
    } else if (split == "target_test") {
      d.target_test.push_back(std::move(e));
    } else {
      throw ConfigError(where + ": unknown split '" + split + "'");
    }
  }
  d.num_classes = static_cast<std::size_t>(max_label + 1);
  return d;
}

std::string feature_header(std::size_t feature_dim) {
  std::string h = "domain,class,perturbed_x,perturbed_y,omega";
  for (std::size_t k = 0; k < feature_dim; ++k) h += ",f" + std::to_string(k);
  return h;
}

std::size_t export_features(const ModelTriple& model, const DomainData& data, const std::string& out_path) {
  const ModelDims& dims = model.dims;
  for (const auto* set : {&data.source, &data.target_labeled, &data.target_unlabeled, &data.target_test}) {
    for (const Example& e : *set) {
      if (e.x.size() != dims.input_dim) {
        throw ShapeError("export_features: dataset inputs have dimension " + std::to_string(e.x.size()) +
                         " but the checkpoint expects " + std::to_string(dims.input_dim));
      }
      if (e.y != kHiddenLabel && (e.y < 0 || static_cast<std::size_t>(e.y) >= dims.num_classes)) {
        throw ShapeError("export_features: label " + std::to_string(e.y) + " outside the checkpoint's " +
                         std::to_string(dims.num_classes) + " classes");
      }
    }
  }
  std::ofstream out = open_out(out_path);
  out << feature_header(dims.feature_dim) << '\n';
  std::size_t rows = 0;
  auto write = [&](const char* domain, const std::vector<Example>& xs, bool gated) {
    if (xs.empty()) return;
    const Tensor f = feature_forward(model.F, inputs_of(xs));
    std::vector<double> d;
    if (gated) {
      const Tensor dv = discriminate(model.D, f, encode_labels(labels_of(xs), dims.num_classes));
      d = dv.values();
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const Example& e = xs[i];
      out << domain << ',' << (e.y == kHiddenLabel ? std::string() : std::to_string(e.y)) << ','
          << (e.perturbed_x ? 1 : 0) << ',' << (e.perturbed_y ? 1 : 0) << ',';
      if (gated) out << text::shortest(omega_from_d(d[i]));
      for (std::size_t k = 0; k < f.cols(); ++k) out << ',' << text::shortest(f(i, k));
      out << '\n';
      ++rows;
    }
  };
  write("source", data.source, true);
  write("target", data.target_labeled, false);
  write("target", data.target_unlabeled, false);
  write("target", data.target_test, false);
  return rows;
}

std::size_t export_features(const std::string& checkpoint_path, const std::string& dataset_path,
                            const std::string& out_path) {
  const Checkpoint c = load_checkpoint(checkpoint_path);
  const DomainData d = load_dataset(dataset_path);
  return export_features(c.model, d, out_path);
}

}  // namespace ntlab
