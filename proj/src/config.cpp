#include "ntlab/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ntlab/errors.hpp"

namespace ntlab {

using nlohmann::json;

DomainSetup ScenarioParams::setup() const {
  DomainSetup s;
  s.target_spec = ring_scenario(num_classes, radius, stddev, 0.0, {0.0, 0.0});
  s.source_spec = ring_scenario(num_classes, radius, stddev, source_rotation_deg, source_offset);
  s.target_spec.prior = prior;
  s.source_spec.prior = prior;
  s.target_spec.noise = s.source_spec.noise = NoiseModel{noise_stddev, noise_flip_prob};
  s.n_source = n_source;
  s.n_target = n_target;
  s.max_labeled_per_class = max_labeled_per_class;
  return s;
}

GridSpec table1_grid() { return GridSpec{}; }

GridSpec ablation_grid() {
  GridSpec g;
  g.eps = {0.7, 0.3};
  g.l_pct = {30.0, 10.0};
  g.variants = {Variant::base,      Variant::target_only, Variant::oracle,        Variant::gate_only,
                Variant::label_only, Variant::joint_only,  Variant::marginal_only, Variant::none_match,
                Variant::gate};
  return g;
}

namespace {

std::string indexed(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

// Expected per-class counts of the target train half under the prior.
std::vector<std::size_t> expected_train_counts(const ScenarioParams& s) {
  const std::size_t n_train = s.n_target / 2;
  const std::size_t K = s.num_classes;
  std::vector<std::size_t> counts(K, 0);
  std::vector<double> rem(K, 0.0);
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const double p = s.prior.empty() ? 1.0 / static_cast<double>(K) : s.prior[k];
    const double q = p * static_cast<double>(n_train);
    counts[k] = static_cast<std::size_t>(std::floor(q));
    rem[k] = q - std::floor(q);
    assigned += counts[k];
  }
  while (assigned < n_train) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k) best = rem[k] > rem[best] ? k : best;
    ++counts[best];
    rem[best] = -1.0;
    ++assigned;
  }
  return counts;
}

}  // namespace

ValidationReport validate(const ExperimentConfig& cfg) {
  ValidationReport r;
  auto bad = [&](std::string path, std::string msg) { r.violations.push_back({std::move(path), std::move(msg)}); };
  const ScenarioParams& s = cfg.scenario;

  if (s.num_classes < 2) bad("scenario.num_classes", "must be >= 2");
  if (!(s.radius >= 0.0) || !std::isfinite(s.radius)) bad("scenario.radius", "must be >= 0");
  if (!(s.stddev > 0.0) || !std::isfinite(s.stddev)) bad("scenario.stddev", "must be > 0");
  if (!s.prior.empty()) {
    if (s.prior.size() != s.num_classes) {
      bad("scenario.prior", "has " + std::to_string(s.prior.size()) + " entries, expected num_classes = " +
                                std::to_string(s.num_classes));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < s.prior.size(); ++i) {
      if (!(s.prior[i] > 0.0)) bad(indexed("scenario.prior", i), "must be > 0");
      sum += s.prior[i];
    }
    if (std::abs(sum - 1.0) > 1e-9) bad("scenario.prior", "must sum to 1 (sum is " + std::to_string(sum) + ")");
  }
  if (s.source_offset.size() != 2) bad("scenario.source_offset", "must have exactly 2 entries");
  if (!std::isfinite(s.source_rotation_deg)) bad("scenario.source_rotation_deg", "must be finite");
  if (!(s.noise_stddev >= 0.0) || !std::isfinite(s.noise_stddev)) bad("scenario.noise_stddev", "must be >= 0");
  if (!(s.noise_flip_prob >= 0.0 && s.noise_flip_prob <= 1.0)) bad("scenario.noise_flip_prob", "must lie in [0, 1]");
  if (s.n_source == 0) bad("scenario.n_source", "must be > 0");
  if (s.n_target < 2) bad("scenario.n_target", "must be >= 2 for the 50/50 split");

  const GridSpec& g = cfg.grid;
  if (g.eps.empty()) bad("grid.eps", "must not be empty");
  if (g.l_pct.empty()) bad("grid.l_pct", "must not be empty");
  if (g.variants.empty()) bad("grid.variants", "must not be empty");
  if (g.seeds.empty()) bad("grid.seeds", "must not be empty");
  for (std::size_t i = 0; i < g.eps.size(); ++i) {
    if (!(g.eps[i] >= 0.0 && g.eps[i] <= 1.0)) {
      bad(indexed("grid.eps", i), "value " + std::to_string(g.eps[i]) + " out of range [0, 1]");
    }
  }
  bool any_labeled = false;
  for (std::size_t i = 0; i < g.l_pct.size(); ++i) {
    if (!(g.l_pct[i] >= 0.0 && g.l_pct[i] <= 100.0)) {
      bad(indexed("grid.l_pct", i), "value " + std::to_string(g.l_pct[i]) + " out of range [0, 100]");
    } else if (g.l_pct[i] > 0.0) {
      any_labeled = true;
    }
  }
  if (std::set<std::uint64_t>(g.seeds.begin(), g.seeds.end()).size() != g.seeds.size()) {
    r.warnings.push_back("grid.seeds: duplicate seeds produce duplicate rows");
  }

  if (any_labeled && s.max_labeled_per_class && *s.max_labeled_per_class == 0) {
    bad("scenario.max_labeled_per_class", "is 0 but grid.l_pct asks for labeled target data");
  }
  const bool scenario_ok = r.violations.empty();
  if (scenario_ok) {
    const std::vector<std::size_t> counts = expected_train_counts(s);
    for (double l : g.l_pct) {
      if (!(l > 0.0)) continue;
      std::vector<std::string> w;
      const std::vector<std::size_t> alloc = labeled_allocation(counts, l, s.max_labeled_per_class, &w);
      for (std::string& msg : w) r.warnings.push_back("grid.l_pct: " + msg);
      std::size_t got = 0;
      for (std::size_t a : alloc) got += a;
      const auto want = static_cast<std::size_t>(std::llround(l / 100.0 * static_cast<double>(s.n_target / 2)));
      if (s.max_labeled_per_class && got < want) {
        r.warnings.push_back("grid.l_pct: " + std::to_string(l) + "% asks for " + std::to_string(want) +
                             " labeled examples; max_labeled_per_class caps it at " + std::to_string(got));
      }
    }
  }

  for (const std::string& v : cfg.train.violations()) {
    const auto space = v.find(' ');
    bad(v.substr(0, space), v.substr(space + 1));
  }
  if (cfg.train.steps == 0) bad("train.steps", "must be > 0");
  if (cfg.output_dir.empty()) bad("output_dir", "must not be empty");
  return r;
}

namespace {

class Reader {
 public:
  explicit Reader(ValidationReport& r) : rep_(r) {}

  void unknown_keys(const json& obj, const std::string& path, std::initializer_list<const char*> known) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      bool found = false;
      for (const char* k : known) found = found || it.key() == k;
      if (!found) rep_.warnings.push_back(join(path, it.key()) + ": unknown field ignored");
    }
  }

  bool object(const json& j, const std::string& path) {
    if (j.is_object()) return true;
    type_error(path, "an object");
    return false;
  }

  void number(const json& obj, const std::string& path, const char* key, double& out) {
    if (!obj.contains(key)) return;
    const json& j = obj.at(key);
    if (j.is_number()) {
      out = j.get<double>();
    } else {
      type_error(join(path, key), "a number");
    }
  }

  template <class Int>
  void integer(const json& obj, const std::string& path, const char* key, Int& out) {
    if (!obj.contains(key)) return;
    read_integer(obj.at(key), join(path, key), out);
  }

  template <class Int>
  bool read_integer(const json& j, const std::string& path, Int& out) {
    if (j.is_number_unsigned()) {
      out = static_cast<Int>(j.get<std::uint64_t>());
      return true;
    }
    if (j.is_number_integer()) {
      rep_.violations.push_back({path, "must be >= 0 (got " + j.dump() + ")"});
      return false;
    }
    type_error(path, "a non-negative integer");
    return false;
  }

  void numbers(const json& obj, const std::string& path, const char* key, std::vector<double>& out) {
    if (!obj.contains(key)) return;
    const json& j = obj.at(key);
    const std::string p = join(path, key);
    if (!j.is_array()) {
      type_error(p, "an array of numbers");
      return;
    }
    out.clear();
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (j[i].is_number()) {
        out.push_back(j[i].get<double>());
      } else {
        type_error(indexed(p, i), "a number");
      }
    }
  }

  void type_error(const std::string& path, const char* expected) {
    rep_.violations.push_back({path, std::string("expected ") + expected});
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  ValidationReport& rep_;
};

void read_scenario(Reader& rd, const json& j, ScenarioParams& s) {
  const std::string p = "scenario";
  if (!rd.object(j, p)) return;
  rd.unknown_keys(j, p,
                  {"num_classes", "radius", "stddev", "prior", "source_rotation_deg", "source_offset", "noise_stddev",
                   "noise_flip_prob", "n_source", "n_target", "max_labeled_per_class"});
  rd.integer(j, p, "num_classes", s.num_classes);
  rd.number(j, p, "radius", s.radius);
  rd.number(j, p, "stddev", s.stddev);
  rd.numbers(j, p, "prior", s.prior);
  rd.number(j, p, "source_rotation_deg", s.source_rotation_deg);
  rd.numbers(j, p, "source_offset", s.source_offset);
  rd.number(j, p, "noise_stddev", s.noise_stddev);
  rd.number(j, p, "noise_flip_prob", s.noise_flip_prob);
  rd.integer(j, p, "n_source", s.n_source);
  rd.integer(j, p, "n_target", s.n_target);
  if (j.contains("max_labeled_per_class")) {
    const json& cap = j.at("max_labeled_per_class");
    if (cap.is_null()) {
      s.max_labeled_per_class.reset();
    } else {
      std::size_t v = 0;
      if (rd.read_integer(cap, "scenario.max_labeled_per_class", v)) s.max_labeled_per_class = v;
    }
  }
}

void read_grid(Reader& rd, const json& j, GridSpec& g) {
  const std::string p = "grid";
  if (!rd.object(j, p)) return;
  rd.unknown_keys(j, p, {"eps", "l_pct", "variants", "seeds"});
  rd.numbers(j, p, "eps", g.eps);
  rd.numbers(j, p, "l_pct", g.l_pct);
  if (j.contains("variants")) {
    const json& v = j.at("variants");
    if (!v.is_array()) {
      rd.type_error("grid.variants", "an array of variant names");
    } else {
      g.variants.clear();
      for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string path = indexed("grid.variants", i);
        if (!v[i].is_string()) {
          rd.type_error(path, "a variant name");
          continue;
        }
        const auto parsed = parse_variant(v[i].get<std::string>());
        if (parsed) {
          g.variants.push_back(*parsed);
        } else {
          rd.rep_.violations.push_back({path, "unknown variant '" + v[i].get<std::string>() + "'"});
        }
      }
    }
  }
  if (j.contains("seeds")) {
    const json& v = j.at("seeds");
    if (!v.is_array()) {
      rd.type_error("grid.seeds", "an array of non-negative integers");
    } else {
      g.seeds.clear();
      for (std::size_t i = 0; i < v.size(); ++i) {
        std::uint64_t seed = 0;
        if (rd.read_integer(v[i], indexed("grid.seeds", i), seed)) g.seeds.push_back(seed);
      }
    }
  }
}

void read_train(Reader& rd, const json& j, TrainConfig& t) {
  const std::string p = "train";
  if (!rd.object(j, p)) return;
  rd.unknown_keys(j, p,
                  {"lambda", "mu_max", "learning_rate", "steps", "source_batch", "unlabeled_batch", "labeled_batch",
                   "beta1", "beta2", "adam_eps", "omega_clamp", "gate_warmup", "log_interval", "hidden",
                   "feature_dim", "disc_hidden"});
  rd.number(j, p, "lambda", t.lambda);
  rd.number(j, p, "mu_max", t.mu_max);
  rd.number(j, p, "learning_rate", t.learning_rate);
  rd.integer(j, p, "steps", t.steps);
  rd.integer(j, p, "source_batch", t.source_batch);
  rd.integer(j, p, "unlabeled_batch", t.unlabeled_batch);
  rd.integer(j, p, "labeled_batch", t.labeled_batch);
  rd.number(j, p, "beta1", t.beta1);
  rd.number(j, p, "beta2", t.beta2);
  rd.number(j, p, "adam_eps", t.adam_eps);
  rd.number(j, p, "omega_clamp", t.omega_clamp);
  rd.number(j, p, "gate_warmup", t.gate_warmup);
  rd.integer(j, p, "log_interval", t.log_interval);
  rd.integer(j, p, "hidden", t.hidden);
  rd.integer(j, p, "feature_dim", t.feature_dim);
  rd.integer(j, p, "disc_hidden", t.disc_hidden);
}

std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

ParseResult parse_config(const std::string& text, const GridSpec* grid_override) {
  ParseResult out;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte);
    out.report.violations.push_back(
        {"<document>", "syntax error at line " + std::to_string(line) + ", column " + std::to_string(col)});
    return out;
  }
  Reader rd(out.report);
  if (!rd.object(doc, "<document>")) return out;
  rd.unknown_keys(doc, "", {"scenario", "grid", "train", "output_dir"});
  if (doc.contains("scenario")) read_scenario(rd, doc.at("scenario"), out.config.scenario);
  if (doc.contains("grid")) read_grid(rd, doc.at("grid"), out.config.grid);
  if (doc.contains("train")) read_train(rd, doc.at("train"), out.config.train);
  if (doc.contains("output_dir")) {
    if (doc.at("output_dir").is_string()) {
      out.config.output_dir = doc.at("output_dir").get<std::string>();
    } else {
      rd.type_error("output_dir", "a string");
    }
  }
  if (grid_override) out.config.grid = *grid_override;
  ValidationReport range = validate(out.config);
  out.report.violations.insert(out.report.violations.end(), range.violations.begin(), range.violations.end());
  out.report.warnings.insert(out.report.warnings.end(), range.warnings.begin(), range.warnings.end());
  return out;
}

ParseResult load_config(const std::string& path, const GridSpec* grid_override) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), grid_override);
}

json to_json(const ExperimentConfig& cfg) {
  const ScenarioParams& s = cfg.scenario;
  json scenario = {{"num_classes", s.num_classes},
                   {"radius", s.radius},
                   {"stddev", s.stddev},
                   {"prior", s.prior},
                   {"source_rotation_deg", s.source_rotation_deg},
                   {"source_offset", s.source_offset},
                   {"noise_stddev", s.noise_stddev},
                   {"noise_flip_prob", s.noise_flip_prob},
                   {"n_source", s.n_source},
                   {"n_target", s.n_target},
                   {"max_labeled_per_class", nullptr}};
  if (s.max_labeled_per_class) scenario["max_labeled_per_class"] = *s.max_labeled_per_class;
  json variants = json::array();
  for (Variant v : cfg.grid.variants) variants.push_back(std::string(to_string(v)));
  const TrainConfig& t = cfg.train;
  json train = {{"lambda", t.lambda},
                {"mu_max", t.mu_max},
                {"learning_rate", t.learning_rate},
                {"steps", t.steps},
                {"source_batch", t.source_batch},
                {"unlabeled_batch", t.unlabeled_batch},
                {"labeled_batch", t.labeled_batch},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"adam_eps", t.adam_eps},
                {"omega_clamp", t.omega_clamp},
                {"gate_warmup", t.gate_warmup},
                {"log_interval", t.log_interval},
                {"hidden", t.hidden},
                {"feature_dim", t.feature_dim},
                {"disc_hidden", t.disc_hidden}};
  return {{"scenario", scenario},
          {"grid", {{"eps", cfg.grid.eps}, {"l_pct", cfg.grid.l_pct}, {"variants", variants}, {"seeds", cfg.grid.seeds}}},
          {"train", train},
          {"output_dir", cfg.output_dir}};
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

// The output location does not change results, so it is left out of the hash.
json hashed_json(const ExperimentConfig& cfg) {
  json j = to_json(cfg);
  j.erase("output_dir");
  return j;
}

}  // namespace

std::string config_hash(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(hashed_json(cfg).dump())));
  return buf;
}

}  // namespace ntlab
