// Copyright (c) 2026 sdlab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdlab/distill.hpp"
#include "sdlab/metrics.hpp"
#include "sdlab/schedule.hpp"
#include "sdlab/target.hpp"

namespace sdlab {

// Experiment configuration: a flat `key = value` text file (diff-able
// provenance) or the equivalent nested JSON. Unknown keys are errors and every
// parse/validation failure carries the offending location.

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MixtureComponentSpec {
  double weight = 1.0;
  std::vector<double> mu;
  std::vector<double> sigma;  // row-major, mu.size()^2 entries
};

struct MixtureSpec {
  std::vector<MixtureComponentSpec> components;
};

struct ScheduleConfig {
  std::string kind = "variance-preserving-exp";
  double horizon = 3.0;
  double t_min = 0.05;
  double t_max = 3.0;
  std::string weight = "unit";
};

struct TargetConfig {
  std::string kind = "gaussian";
  std::vector<double> mu{1.0, -1.0};
  std::vector<double> sigma{1.0, 0.0, 0.0, 0.25};  // row-major
  MixtureSpec mixture;
  double prior_guidance = 1.0;
};

struct GeneratorConfig {
  std::string kind = "linear";
  int dim = 2;
  int camera_dim = 2;   // linear family
  int view_count = 2;   // discrete family
  std::string init = "default";
};

struct ScoreModelConfig {
  std::optional<double> eta2;  // overrides distill.eta2 when set
  std::string time_features = "standard";
};

struct MetricsConfig {
  int n_views = 256;
  double temperature = 1.0;
  std::optional<MixtureSpec> reference;
};

struct ExperimentConfig {
  ScheduleConfig schedule;
  TargetConfig target;
  GeneratorConfig generator;
  ScoreModelConfig score_model;
  DistillConfig distill;
  bool score_source_set = false;
  MetricsConfig metrics;
  std::string out_dir = "out";
  bool plot = false;
};

namespace detail {

struct RawValue {
  std::string text;
  int line = 0;
};

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& where, const RawValue& v) {
  try {
    size_t used = 0;
    const double d = std::stod(v.text, &used);
    if (trim(v.text.substr(used)).empty()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(where + ": expected a number, got '" + v.text + "'");
}

inline std::vector<double> parse_array(const std::string& where, const RawValue& v) {
  std::string t = trim(v.text);
  if (t.size() < 2 || t.front() != '[' || t.back() != ']')
    throw ConfigError(where + ": expected an array like [1, 2, 3]");
  t = t.substr(1, t.size() - 2);
  std::vector<double> out;
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(parse_double(where, RawValue{item, v.line}));
  }
  return out;
}

inline bool parse_bool(const std::string& where, const RawValue& v) {
  const std::string t = trim(v.text);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw ConfigError(where + ": expected true or false, got '" + t + "'");
}

// Flat key/value view of a config file: kv text maps directly, JSON is
// flattened with dotted paths so both formats share one interpreter.
class KvMap {
 public:
  KvMap(std::map<std::string, RawValue> entries, std::string source)
      : entries_(std::move(entries)), source_(std::move(source)) {}

  std::string where(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end() || it->second.line <= 0) return source_ + ": " + key;
    return source_ + ":" + std::to_string(it->second.line) + ": " + key;
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::optional<std::string> get_string(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    consumed_.insert(key);
    return trim(it->second.text);
  }

  std::optional<double> get_double(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    consumed_.insert(key);
    return parse_double(where(key), it->second);
  }

  std::optional<int> get_int(const std::string& key) {
    auto d = get_double(key);
    if (!d) return std::nullopt;
    return static_cast<int>(*d);
  }

  std::optional<std::vector<double>> get_array(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    consumed_.insert(key);
    return parse_array(where(key), it->second);
  }

  std::optional<bool> get_bool(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    consumed_.insert(key);
    return parse_bool(where(key), it->second);
  }

  // Indices i for which any "<prefix>.<i>.<suffix>" key exists.
  std::vector<int> indices(const std::string& prefix) const {
    std::vector<int> out;
    for (const auto& [k, v] : entries_) {
      if (k.rfind(prefix + ".", 0) != 0) continue;
      const std::string rest = k.substr(prefix.size() + 1);
      const auto dot = rest.find('.');
      const std::string idx = dot == std::string::npos ? rest : rest.substr(0, dot);
      try {
        const int i = std::stoi(idx);
        if (std::find(out.begin(), out.end(), i) == out.end()) out.push_back(i);
      } catch (const std::exception&) {
        throw ConfigError(where(k) + ": expected a numeric index after '" + prefix + ".'");
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  void check_all_consumed() const {
    for (const auto& [k, v] : entries_)
      if (consumed_.count(k) == 0) throw ConfigError(where(k) + ": unknown config key");
  }

 private:
  std::map<std::string, RawValue> entries_;
  std::set<std::string> consumed_;
  std::string source_;
};

inline KvMap parse_kv_text(const std::string& text, const std::string& source) {
  std::map<std::string, RawValue> entries;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
    if (entries.count(key))
      throw ConfigError(source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    entries[key] = RawValue{value, line_no};
  }
  return KvMap(std::move(entries), source);
}

inline void flatten_json(const nlohmann::json& j, const std::string& prefix,
                         std::map<std::string, RawValue>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it)
      flatten_json(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    return;
  }
  if (j.is_array() && !j.empty() && j.front().is_object()) {
    for (size_t i = 0; i < j.size(); ++i)
      flatten_json(j[i], prefix + "." + std::to_string(i), out);
    return;
  }
  if (j.is_array()) {
    std::string text = "[";
    for (size_t i = 0; i < j.size(); ++i) {
      if (i) text += ", ";
      text += j[i].dump();
    }
    text += "]";
    out[prefix] = RawValue{text, 0};
    return;
  }
  out[prefix] = RawValue{j.is_string() ? j.get<std::string>() : j.dump(), 0};
}

inline KvMap parse_json_text(const std::string& text, const std::string& source) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(source + ": invalid JSON: " + e.what());
  }
  std::map<std::string, RawValue> entries;
  flatten_json(j, "", entries);
  return KvMap(std::move(entries), source);
}

inline MixtureSpec read_mixture(KvMap& kv, const std::string& prefix) {
  MixtureSpec spec;
  for (int i : kv.indices(prefix + ".components")) {
    const std::string p = prefix + ".components." + std::to_string(i);
    MixtureComponentSpec comp;
    if (auto w = kv.get_double(p + ".weight")) comp.weight = *w;
    if (auto m = kv.get_array(p + ".mu"))
      comp.mu = *m;
    else
      throw ConfigError(kv.where(p + ".mu") + ": mixture component needs a mean vector");
    if (auto s = kv.get_array(p + ".sigma"))
      comp.sigma = *s;
    else
      throw ConfigError(kv.where(p + ".sigma") + ": mixture component needs a covariance");
    spec.components.push_back(std::move(comp));
  }
  return spec;
}

}  // namespace detail

inline ExperimentConfig config_from_kv(detail::KvMap kv) {
  ExperimentConfig cfg;

  if (auto v = kv.get_string("schedule.kind")) cfg.schedule.kind = *v;
  if (auto v = kv.get_double("schedule.T")) cfg.schedule.horizon = *v;
  cfg.schedule.t_max = cfg.schedule.horizon;
  if (auto v = kv.get_double("schedule.t_min")) cfg.schedule.t_min = *v;
  if (auto v = kv.get_double("schedule.t_max")) cfg.schedule.t_max = *v;
  if (auto v = kv.get_string("schedule.weight")) cfg.schedule.weight = *v;

  if (auto v = kv.get_string("target.kind")) cfg.target.kind = *v;
  if (auto v = kv.get_array("target.mu")) cfg.target.mu = *v;
  if (auto v = kv.get_array("target.sigma")) cfg.target.sigma = *v;
  if (auto v = kv.get_double("target.prior_guidance")) cfg.target.prior_guidance = *v;
  cfg.target.mixture = detail::read_mixture(kv, "target");

  if (auto v = kv.get_string("generator.kind")) cfg.generator.kind = *v;
  if (auto v = kv.get_int("generator.D")) cfg.generator.dim = *v;
  if (auto v = kv.get_int("generator.k")) cfg.generator.camera_dim = *v;
  if (auto v = kv.get_int("generator.K")) cfg.generator.view_count = *v;
  if (auto v = kv.get_string("generator.init")) cfg.generator.init = *v;

  if (auto v = kv.get_double("score_model.eta2")) cfg.score_model.eta2 = *v;
  if (auto v = kv.get_string("score_model.time_features")) cfg.score_model.time_features = *v;

  if (auto v = kv.get_string("distill.method")) cfg.distill.method = method_from_string(*v);
  if (auto v = kv.get_double("distill.lambda")) cfg.distill.lambda = *v;
  if (auto v = kv.get_double("distill.p_null")) cfg.distill.p_null = *v;
  if (auto v = kv.get_double("distill.eta1")) cfg.distill.eta1 = *v;
  if (auto v = kv.get_double("distill.eta2")) cfg.distill.eta2 = *v;
  if (auto v = kv.get_int("distill.steps")) cfg.distill.steps = *v;
  if (auto v = kv.get_int("distill.warmup")) cfg.distill.warmup = *v;
  if (auto v = kv.get_double("distill.seed"))
    cfg.distill.seed = static_cast<std::uint64_t>(*v);
  if (auto v = kv.get_string("distill.score_source")) {
    cfg.distill.score_source = score_source_from_string(*v);
    cfg.score_source_set = true;
  }
  if (auto v = kv.get_int("distill.log_every")) cfg.distill.log_every = *v;
  if (auto v = kv.get_double("distill.init_scale")) cfg.distill.init_scale = *v;
  if (auto v = kv.get_string("distill.optimizer")) {
    if (*v == "adam")
      cfg.distill.use_adam = true;
    else if (*v != "sgd")
      throw ConfigError(kv.where("distill.optimizer") + ": expected sgd or adam");
  }
  if (auto v = kv.get_bool("distill.fit_marginal_directly"))
    cfg.distill.fit_marginal_directly = *v;
  if (auto v = kv.get_double("distill.divergence_guard")) cfg.distill.divergence_guard = *v;

  if (auto v = kv.get_int("metrics.n_views")) cfg.metrics.n_views = *v;
  if (auto v = kv.get_double("metrics.temperature")) cfg.metrics.temperature = *v;
  if (kv.has("metrics.reference.components.0.mu"))
    cfg.metrics.reference = detail::read_mixture(kv, "metrics.reference");

  if (auto v = kv.get_string("out")) cfg.out_dir = *v;
  if (auto v = kv.get_bool("plot")) cfg.plot = *v;

  kv.check_all_consumed();
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text, const std::string& source) {
  const std::string t = detail::trim(text);
  if (!t.empty() && t.front() == '{')
    return config_from_kv(detail::parse_json_text(text, source));
  return config_from_kv(detail::parse_kv_text(text, source));
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

// ---- construction of validated domain objects ----

inline DiffusionSchedule build_schedule(const ExperimentConfig& cfg) {
  if (cfg.schedule.kind != "variance-preserving-exp")
    throw ConfigError("schedule.kind: unknown kind '" + cfg.schedule.kind +
                      "' (variance-preserving-exp)");
  try {
    return DiffusionSchedule(cfg.schedule.horizon, cfg.schedule.t_min, cfg.schedule.t_max,
                             weight_kind_from_string(cfg.schedule.weight));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
}

inline MixtureTarget build_mixture(const MixtureSpec& spec, const std::string& what) {
  if (spec.components.empty()) throw ConfigError(what + ": mixture needs components");
  std::vector<GaussianTarget> comps;
  Vec weights(static_cast<Eigen::Index>(spec.components.size()));
  for (size_t i = 0; i < spec.components.size(); ++i) {
    const auto& c = spec.components[i];
    const int d = static_cast<int>(c.mu.size());
    if (static_cast<int>(c.sigma.size()) != d * d)
      throw ConfigError(what + ".components." + std::to_string(i) +
                        ".sigma: expected a row-major " + std::to_string(d) + "x" +
                        std::to_string(d) + " matrix");
    Vec mu = Eigen::Map<const Vec>(c.mu.data(), d);
    Mat sigma(d, d);
    for (int r = 0; r < d; ++r)
      for (int cc = 0; cc < d; ++cc) sigma(r, cc) = c.sigma[static_cast<size_t>(r * d + cc)];
    weights[static_cast<Eigen::Index>(i)] = c.weight;
    try {
      comps.emplace_back(mu, sigma);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(what + ".components." + std::to_string(i) + ": " + e.what());
    }
  }
  try {
    return MixtureTarget(weights, std::move(comps));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

inline Target build_target(const ExperimentConfig& cfg) {
  if (cfg.target.kind == "gaussian") {
    const int d = static_cast<int>(cfg.target.mu.size());
    if (static_cast<int>(cfg.target.sigma.size()) != d * d)
      throw ConfigError("target.sigma: expected a row-major " + std::to_string(d) + "x" +
                        std::to_string(d) + " matrix");
    Vec mu = Eigen::Map<const Vec>(cfg.target.mu.data(), d);
    Mat sigma(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) sigma(r, c) = cfg.target.sigma[static_cast<size_t>(r * d + c)];
    try {
      return Target(GaussianTarget(mu, sigma), cfg.target.prior_guidance);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("target: ") + e.what());
    }
  }
  if (cfg.target.kind == "mixture")
    return Target(build_mixture(cfg.target.mixture, "target"), cfg.target.prior_guidance);
  throw ConfigError("target.kind: unknown kind '" + cfg.target.kind + "' (gaussian|mixture)");
}

inline Generator build_generator(const ExperimentConfig& cfg) {
  if (cfg.generator.init != "default")
    throw ConfigError("generator.init: unknown policy '" + cfg.generator.init + "' (default)");
  RngStream init_rng(cfg.distill.seed, Stream::kGeneratorInit);
  try {
    return make_initial_generator(
        cfg.generator.kind, cfg.generator.dim,
        cfg.generator.kind == "linear" ? cfg.generator.camera_dim : cfg.generator.view_count,
        cfg.distill.init_scale, init_rng);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("generator: ") + e.what());
  }
}

// Reference classifier: explicit metrics.reference, or the target itself
// (a one-component mixture when the target is a plain Gaussian).
inline SyntheticClassifier build_classifier(const ExperimentConfig& cfg, const Target& target) {
  if (cfg.metrics.reference)
    return SyntheticClassifier(build_mixture(*cfg.metrics.reference, "metrics.reference"),
                               cfg.metrics.temperature);
  if (target.is_gaussian()) {
    const auto& g = target.gaussian();
    return SyntheticClassifier(MixtureTarget(Vec::Ones(1), {g}), cfg.metrics.temperature);
  }
  return SyntheticClassifier(target.mixture(), cfg.metrics.temperature);
}

inline DistillConfig effective_distill_config(const ExperimentConfig& cfg) {
  DistillConfig d = cfg.distill;
  if (cfg.score_model.eta2) d.eta2 = *cfg.score_model.eta2;
  return d;
}

// Cross-block validation; throws ConfigError naming the violated invariant.
inline void validate_config(const ExperimentConfig& cfg) {
  build_schedule(cfg);
  const Target target = build_target(cfg);
  if (cfg.generator.kind != "linear" && cfg.generator.kind != "discrete")
    throw ConfigError("generator.kind: unknown kind '" + cfg.generator.kind +
                      "' (linear|discrete)");
  if (cfg.generator.dim < 1) throw ConfigError("generator.D must be >= 1");
  if (cfg.generator.kind == "linear" && cfg.generator.camera_dim < 1)
    throw ConfigError("generator.k must be >= 1");
  if (cfg.generator.kind == "discrete" && cfg.generator.view_count < 1)
    throw ConfigError("generator.K must be >= 1");
  if (target.dim() != cfg.generator.dim)
    throw ConfigError("target dimension " + std::to_string(target.dim()) +
                      " does not match generator.D = " + std::to_string(cfg.generator.dim));
  if (cfg.distill.method != Method::kSds && !cfg.score_source_set)
    throw ConfigError("distill.method = " + to_string(cfg.distill.method) +
                      " requires an explicit distill.score_source (oracle|learned): the method "
                      "consumes a rendered-image score");
  if (cfg.score_model.time_features != "standard")
    throw ConfigError("score_model.time_features: unknown set '" + cfg.score_model.time_features +
                      "' (standard)");
  if (cfg.metrics.n_views < 1) throw ConfigError("metrics.n_views must be >= 1");
  if (!(cfg.metrics.temperature > 0.0)) throw ConfigError("metrics.temperature must be positive");
  if (cfg.metrics.reference) {
    const MixtureTarget ref = build_mixture(*cfg.metrics.reference, "metrics.reference");
    if (ref.dim() != cfg.generator.dim)
      throw ConfigError("metrics.reference dimension does not match generator.D");
  }
  try {
    effective_distill_config(cfg).validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

// Full effective configuration as nested JSON; re-running from this echo
// reproduces the trajectory byte for byte.
inline nlohmann::json config_echo_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["schedule"] = {{"kind", cfg.schedule.kind},
                   {"T", cfg.schedule.horizon},
                   {"t_min", cfg.schedule.t_min},
                   {"t_max", cfg.schedule.t_max},
                   {"weight", cfg.schedule.weight}};
  nlohmann::json jt;
  jt["kind"] = cfg.target.kind;
  jt["prior_guidance"] = cfg.target.prior_guidance;
  if (cfg.target.kind == "gaussian") {
    jt["mu"] = cfg.target.mu;
    jt["sigma"] = cfg.target.sigma;
  } else {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : cfg.target.mixture.components)
      comps.push_back({{"weight", c.weight}, {"mu", c.mu}, {"sigma", c.sigma}});
    jt["components"] = comps;
  }
  j["target"] = jt;
  nlohmann::json jg;
  jg["kind"] = cfg.generator.kind;
  jg["D"] = cfg.generator.dim;
  jg["init"] = cfg.generator.init;
  if (cfg.generator.kind == "linear")
    jg["k"] = cfg.generator.camera_dim;
  else
    jg["K"] = cfg.generator.view_count;
  j["generator"] = jg;
  j["score_model"] = {{"time_features", cfg.score_model.time_features}};
  if (cfg.score_model.eta2) j["score_model"]["eta2"] = *cfg.score_model.eta2;
  const DistillConfig& d = cfg.distill;
  j["distill"] = {{"method", to_string(d.method)},
                  {"lambda", d.lambda},
                  {"p_null", d.p_null},
                  {"eta1", d.eta1},
                  {"eta2", d.eta2},
                  {"steps", d.steps},
                  {"warmup", d.warmup},
                  {"seed", d.seed},
                  {"log_every", d.log_every},
                  {"init_scale", d.init_scale},
                  {"optimizer", d.use_adam ? "adam" : "sgd"},
                  {"fit_marginal_directly", d.fit_marginal_directly},
                  {"divergence_guard", d.divergence_guard}};
  if (cfg.score_source_set) j["distill"]["score_source"] = to_string(d.score_source);
  nlohmann::json jm;
  jm["n_views"] = cfg.metrics.n_views;
  jm["temperature"] = cfg.metrics.temperature;
  if (cfg.metrics.reference) {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : cfg.metrics.reference->components)
      comps.push_back({{"weight", c.weight}, {"mu", c.mu}, {"sigma", c.sigma}});
    jm["reference"] = {{"components", comps}};
  }
  j["metrics"] = jm;
  j["out"] = cfg.out_dir;
  j["plot"] = cfg.plot;
  return j;
}

}  // namespace sdlab
