/*
 * Copyright 2026 The predgap Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "pipeline/run_config.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"

namespace predgap::pipeline {

using synthpop::ScenarioConfig;

ScenarioConfig ScenarioPreset(std::string_view name) {
  ScenarioConfig c;
  c.intercept = -0.6;
  c.linear_weights = {{"parent_degree", 0.8},        {"parent_income_rank", 0.5}, {"sbo", -1.5},
                      {"female", 0.3},               {"migrant", -0.2},           {"wpo", -0.2},
                      {"class_mean_income_rank", 0.2}, {"neighborhood_mean_education", 0.2}};
  if (name == "none") return ScenarioConfig{};
  if (name == "linear") return c;
  if (name == "interaction") {
    // Mother's income helps everywhere except for girls without a father,
    // where the slope flips sign. A single linear slope cannot fit both.
    c.outcome_mode = synthpop::OutcomeMode::kInteraction;
    c.father_absence_rate = 0.3;
    c.linear_weights["mother_income_rank"] = 1.0;
    c.interaction_terms = {{{"father_absent", "female", "mother_income_rank"}, -2.5}};
    return c;
  }
  if (name == "network") {
    c.outcome_mode = synthpop::OutcomeMode::kNetworkMediated;
    c.network_weights = {{"classmates_parent_degree_share", 1.0}, {"educated_migrant_neighbor_share", 0.3}};
    return c;
  }
  if (name == "nested") {
    c.linear_weights = {{"father_degree", 0.7},
                        {"mother_degree", 0.7},
                        {"father_income_rank", 0.5},
                        {"mother_income_rank", 0.5}};
    return c;
  }
  throw ConfigError("unknown scenario preset '" + std::string(name) + "'");
}

Json DefaultRunConfig() {
  Json subgroups = Json::array();
  auto add = [&](const char* var, const char* binning, int bins, const char* by) {
    Json s{{"variable", var}, {"binning", binning}, {"n_bins", bins}};
    if (by) s["by"] = by;
    subgroups.push_back(std::move(s));
  };
  add("father_known", "categorical", 10, nullptr);
  add("mother_known", "categorical", 10, nullptr);
  add("gender", "categorical", 10, "father_known");
  add("mother_degree", "categorical", 10, "father_known");
  add("mother_income_rank", "quantile", 5, "father_known");
  add("household_income_rank", "quantile", 5, "father_known");
  add("school_income_rank", "quantile", 5, "father_known");
  add("neighbor_education", "quantile", 5, "father_known");
  add("gender", "categorical", 10, nullptr);
  add("father_income_rank", "quantile", 10, nullptr);
  add("mother_income_rank", "quantile", 10, nullptr);
  add("wpo_weight", "categorical", 10, nullptr);
  add("school_income_rank", "quantile", 10, nullptr);
  add("school_wpo_weight", "quantile", 10, nullptr);
  add("neighbor_income_rank", "quantile", 10, nullptr);
  add("neighbor_education", "quantile", 10, nullptr);
  add("migration_generation", "categorical", 10, nullptr);

  return Json{
      {"registry_dir", "data"},
      {"out_dir", "run"},
      {"run_name", "main"},
      {"scenario", Json{{"preset", "linear"}}},
      {"context", "full"},
      {"models", {"linear", "gbt", "gnn"}},
      {"split", {{"seed", 2024}, {"train_fraction", 0.8}}},
      {"tuning",
       {{"seed", 7}, {"split_seed", 11}, {"gbt_budget", 40}, {"gnn_budget", 40}, {"folds", 3},
        {"record_time", false}, {"baseline", true}}},
      {"gbt", Json::object()},
      {"gnn", Json::object()},
      {"threshold", 0.5},
      {"bootstrap", {{"n_resamples", 1000}, {"seed", 2024}, {"confidence", 0.95}}},
      {"subgroups", subgroups},
      {"min_group_size", 50},
      {"nested", {{"models", {"linear", "gbt", "gnn"}}}},
      {"sweep", {{"start", 0.05}, {"stop", 0.95}, {"step", 0.05}}},
      {"embed", {{"n_components", 3}, {"restricted", {"nuclear", "school"}}}},
  };
}

namespace {

// Objects whose members are checked by their own parsers.
bool FreeForm(const std::string& path) { return path == "scenario" || path == "gbt" || path == "gnn"; }

void Merge(Json& base, const Json& patch, const std::string& path) {
  for (const auto& [key, value] : patch.items()) {
    const std::string full = path.empty() ? key : path + "." + key;
    if (!FreeForm(path) && !base.contains(key)) throw ConfigError("unknown config key '" + full + "'");
    if (base.contains(key) && base[key].is_object() && value.is_object() && !FreeForm(full)) {
      Merge(base[key], value, full);
    } else if (base.contains(key) && FreeForm(full)) {
      if (!value.is_object()) throw ConfigError("config key '" + full + "' must be an object");
      for (const auto& [k, v] : value.items()) base[key][k] = v;
    } else {
      base[key] = value;
    }
  }
}

template <typename T>
T Get(const Json& j, const char* a, const char* b = nullptr) {
  const Json& v = b ? j.at(a).at(b) : j.at(a);
  try {
    return v.get<T>();
  } catch (const std::exception&) {
    throw ConfigError(std::string("config key '") + a + (b ? std::string(".") + b : "") + "' has the wrong type");
  }
}

}  // namespace

RunConfig::RunConfig() : doc_(DefaultRunConfig()) {}

RunConfig RunConfig::FromJson(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("run config must be a JSON object");
  RunConfig c;
  const Json defaults = DefaultRunConfig();
  const bool has_run_key = std::any_of(doc.items().begin(), doc.items().end(),
                                       [&](const auto& kv) { return defaults.contains(kv.key()); });
  if (has_run_key || doc.empty()) {
    Merge(c.doc_, doc, "");
  } else {
    // A bare scenario document replaces the default preset.
    c.doc_["scenario"] = doc;
  }
  c.Validate();
  return c;
}

RunConfig RunConfig::Load(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides) {
  RunConfig c;
  if (file) {
    Json doc;
    try {
      doc = ReadJsonFile(*file);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("cannot parse config '" + file->string() + "': " + e.what());
    }
    c = FromJson(doc);
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    c.Set(std::string_view(o).substr(0, eq), std::string_view(o).substr(eq + 1));
  }
  c.Validate();
  return c;
}

void RunConfig::Set(std::string_view dotted_key, std::string_view value) {
  Json parsed = Json::parse(value, nullptr, false);
  if (parsed.is_discarded()) {
    // Bare words; comma-separated lists become arrays.
    if (value.find(',') != std::string_view::npos) {
      parsed = Json::array();
      size_t pos = 0;
      while (pos <= value.size()) {
        const size_t comma = std::min(value.find(',', pos), value.size());
        parsed.push_back(std::string(value.substr(pos, comma - pos)));
        pos = comma + 1;
      }
    } else {
      parsed = std::string(value);
    }
  }
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    const size_t dot = dotted_key.find('.', start);
    parts.emplace_back(dotted_key.substr(start, dot == std::string_view::npos ? dotted_key.npos : dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  Json patch = parsed;
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = Json{{*it, patch}};
  Merge(doc_, patch, "");
}

void RunConfig::Validate() const {
  scenario().Validate();
  (void)context();
  const auto m = models();
  if (m.empty()) throw ConfigError("config key 'models' is empty");
  for (const auto& name : m) {
    if (name != "linear" && name != "gbt" && name != "gnn") throw ConfigError("unknown model family '" + name + "'");
  }
  for (const auto& name : nested_models()) {
    if (name != "linear" && name != "gbt" && name != "gnn") throw ConfigError("unknown model family '" + name + "'");
  }
  const double f = train_fraction();
  if (!(f > 0.0 && f < 1.0)) throw ConfigError("config key 'split.train_fraction' must be in (0, 1)");
  if (budget("gbt") < 1 || budget("gnn") < 1) throw ConfigError("tuning budgets must be >= 1");
  if (folds() < 2) throw ConfigError("config key 'tuning.folds' must be >= 2");
  gbt_defaults().Validate();
  gnn_defaults().Validate();
  const double t = threshold();
  if (!(t > 0.0 && t < 1.0)) throw ConfigError("config key 'threshold' must be in (0, 1)");
  const auto b = bootstrap();
  if (b.n_resamples < 100) throw ConfigError("config key 'bootstrap.n_resamples' must be >= 100");
  if (!(b.confidence > 0.0 && b.confidence < 1.0)) throw ConfigError("config key 'bootstrap.confidence' must be in (0, 1)");
  (void)subgroups();
  (void)sweep_thresholds();
  if (embed_components() < 1) throw ConfigError("config key 'embed.n_components' must be >= 1");
  for (const auto& r : embed_restricted()) {
    try {
      (void)features::ContextSetSpec::Parse(r);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("config key 'embed.restricted': ") + e.what());
    }
  }
  if (registry_dir().empty() || out_dir().empty()) throw ConfigError("paths must not be empty");
}

std::filesystem::path RunConfig::registry_dir() const { return Get<std::string>(doc_, "registry_dir"); }
std::filesystem::path RunConfig::out_dir() const { return Get<std::string>(doc_, "out_dir"); }

std::string RunConfig::run_name() const {
  const auto name = Get<std::string>(doc_, "run_name");
  if (name.empty() || name.find_first_of("/\\ ") != std::string::npos) {
    throw ConfigError("config key 'run_name' must be a non-empty word");
  }
  return name;
}

ScenarioConfig RunConfig::scenario() const {
  const Json& s = doc_.at("scenario");
  if (!s.is_object()) throw ConfigError("config key 'scenario' must be an object");
  Json merged;
  if (s.contains("preset")) merged = ScenarioPreset(s["preset"].get<std::string>()).ToJson();
  else merged = ScenarioConfig{}.ToJson();
  for (const auto& [k, v] : s.items()) {
    if (k != "preset") merged[k] = v;
  }
  return ScenarioConfig::FromJson(merged);
}

features::ContextSetSpec RunConfig::context() const {
  try {
    return features::ContextSetSpec::Parse(Get<std::string>(doc_, "context"));
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config key 'context': ") + e.what());
  }
}

std::vector<std::string> RunConfig::models() const { return Get<std::vector<std::string>>(doc_, "models"); }
uint64_t RunConfig::split_seed() const { return Get<uint64_t>(doc_, "split", "seed"); }
double RunConfig::train_fraction() const { return Get<double>(doc_, "split", "train_fraction"); }
uint64_t RunConfig::tuning_seed() const { return Get<uint64_t>(doc_, "tuning", "seed"); }
uint64_t RunConfig::inner_split_seed() const { return Get<uint64_t>(doc_, "tuning", "split_seed"); }

int RunConfig::budget(const std::string& family) const {
  return Get<int>(doc_, "tuning", family == "gnn" ? "gnn_budget" : "gbt_budget");
}

int RunConfig::folds() const { return Get<int>(doc_, "tuning", "folds"); }
bool RunConfig::record_time() const { return Get<bool>(doc_, "tuning", "record_time"); }
bool RunConfig::tune_baseline() const { return Get<bool>(doc_, "tuning", "baseline"); }

model_gbt::GbtParams RunConfig::gbt_defaults() const { return model_gbt::GbtParams::FromJson(doc_.at("gbt")); }

model_gnn::GnnConfig RunConfig::gnn_defaults() const { return model_gnn::GnnConfig::FromJson(doc_.at("gnn")); }

double RunConfig::threshold() const { return Get<double>(doc_, "threshold"); }

evalgap::BootstrapOptions RunConfig::bootstrap() const {
  evalgap::BootstrapOptions o;
  o.n_resamples = Get<int>(doc_, "bootstrap", "n_resamples");
  o.seed = Get<uint64_t>(doc_, "bootstrap", "seed");
  o.confidence = Get<double>(doc_, "bootstrap", "confidence");
  return o;
}

std::string SubgroupRequest::FileKey() const { return by ? spec.variable + "_by_" + *by : spec.variable; }

std::vector<SubgroupRequest> RunConfig::subgroups() const {
  const Json& arr = doc_.at("subgroups");
  if (!arr.is_array()) throw ConfigError("config key 'subgroups' must be an array");
  const int min_size = Get<int>(doc_, "min_group_size");
  if (min_size < 1) throw ConfigError("config key 'min_group_size' must be >= 1");
  std::vector<SubgroupRequest> out;
  for (const auto& s : arr) {
    SubgroupRequest r;
    for (const auto& [k, v] : s.items()) {
      if (k == "variable") r.spec.variable = v.get<std::string>();
      else if (k == "binning") {
        const auto b = v.get<std::string>();
        if (b == "categorical") r.spec.binning = evalgap::Binning::kCategorical;
        else if (b == "quantile") r.spec.binning = evalgap::Binning::kQuantile;
        else throw ConfigError("unknown subgroup binning '" + b + "'");
      } else if (k == "n_bins") r.spec.n_bins = v.get<int>();
      else if (k == "by") r.by = v.get<std::string>();
      else throw ConfigError("unknown subgroup key '" + k + "'");
    }
    if (r.spec.variable.empty()) throw ConfigError("subgroup entry without 'variable'");
    if (r.spec.n_bins < 1) throw ConfigError("subgroup n_bins must be >= 1");
    r.spec.min_size = min_size;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<std::string> RunConfig::nested_models() const {
  return Get<std::vector<std::string>>(doc_, "nested", "models");
}

std::vector<double> RunConfig::sweep_thresholds() const {
  const double start = Get<double>(doc_, "sweep", "start");
  const double stop = Get<double>(doc_, "sweep", "stop");
  const double step = Get<double>(doc_, "sweep", "step");
  if (!(start > 0.0 && stop < 1.0 && start <= stop && step > 0.0)) throw ConfigError("invalid sweep range");
  std::vector<double> out;
  // Integer steps avoid accumulated rounding.
  const auto n = static_cast<int>(std::floor((stop - start) / step + 1e-9));
  for (int k = 0; k <= n; ++k) out.push_back(std::round((start + k * step) * 1e12) / 1e12);
  return out;
}

int RunConfig::embed_components() const { return Get<int>(doc_, "embed", "n_components"); }

std::vector<std::string> RunConfig::embed_restricted() const {
  return Get<std::vector<std::string>>(doc_, "embed", "restricted");
}

Json RunConfig::Seeds() const {
  return Json{{"scenario", scenario().rng_seed},
              {"split", split_seed()},
              {"tuning", tuning_seed()},
              {"inner_split", inner_split_seed()},
              {"gnn", gnn_defaults().rng_seed},
              {"bootstrap", bootstrap().seed}};
}

std::string ContextKey(const features::ContextSetSpec& context) {
  static const char* kKeys[] = {"demographics", "nuclear", "household", "extended", "school", "full"};
  return kKeys[context.size() - 1];
}

}  // namespace predgap::pipeline
