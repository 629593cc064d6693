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

#include "predgap/predgap.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include "common/error.hpp"
#include "evalgap/metrics.hpp"
#include "features/feature_table.hpp"
#include "model_gbt/boost_model.hpp"
#include "model_gnn/gnn_model.hpp"
#include "model_linear/linear_model.hpp"
#include "pipeline/run_config.hpp"
#include "pipeline/stages.hpp"
#include "synthpop/registry.hpp"

using namespace predgap;

struct pg_run {
  pipeline::RunConfig config;
};

struct pg_registry {
  synthpop::Registry registry;
};

struct pg_model {
  std::variant<model_linear::LinearModel, model_gbt::BoostModel, model_gnn::GnnModel> model;
};

namespace {

thread_local std::string g_last_error;

pg_status Fail(pg_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename Fn>
pg_status Guard(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return PG_OK;
  } catch (const Error& e) {
    return Fail(static_cast<pg_status>(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return Fail(PG_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return Fail(PG_ERR_INTERNAL, e.what());
  }
}

void Require(const void* p, const char* what) {
  if (!p) throw InvalidArgument(std::string(what) + " is NULL");
}

char* CopyString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Smallest nested prefix holding every group a model's columns come from.
features::ContextSetSpec ContextOf(const std::vector<std::string>& names) {
  const auto& order = features::NestedContextOrder();
  size_t needed = 1;
  for (const auto& n : names) {
    if (n.size() < 2 || n[1] != ':') continue;
    const auto g = features::ParseGroup(n[0]);
    const auto pos = static_cast<size_t>(std::find(order.begin(), order.end(), g) - order.begin());
    needed = std::max(needed, pos + 1);
  }
  return features::ContextSetSpec::Prefix(needed);
}

}  // namespace

extern "C" {

const char* pg_version(void) { return "0.1.0"; }

const char* pg_last_error(void) { return g_last_error.c_str(); }

void pg_string_free(char* s) { std::free(s); }

void pg_set_log_callback(pg_log_fn fn, void* user_data) {
  if (!fn) {
    pipeline::SetLogSink(nullptr);
    return;
  }
  pipeline::SetLogSink([fn, user_data](std::string_view msg) { fn(std::string(msg).c_str(), user_data); });
}

pg_status pg_run_create(const char* config_path, const char* const* overrides, size_t n_overrides, pg_run** out) {
  return Guard([&] {
    Require(out, "out");
    *out = nullptr;
    if (n_overrides) Require(overrides, "overrides");
    std::vector<std::string> ov;
    for (size_t i = 0; i < n_overrides; ++i) {
      Require(overrides[i], "override");
      ov.emplace_back(overrides[i]);
    }
    std::optional<std::filesystem::path> file;
    if (config_path) file = config_path;
    auto run = std::make_unique<pg_run>(pg_run{pipeline::RunConfig::Load(file, ov)});
    *out = run.release();
  });
}

pg_status pg_run_create_json(const char* config_json, pg_run** out) {
  return Guard([&] {
    Require(config_json, "config_json");
    Require(out, "out");
    *out = nullptr;
    const Json doc = Json::parse(config_json, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config is not valid JSON");
    auto run = std::make_unique<pg_run>(pg_run{pipeline::RunConfig::FromJson(doc)});
    *out = run.release();
  });
}

void pg_run_destroy(pg_run* run) { delete run; }

pg_status pg_run_set(pg_run* run, const char* key, const char* value) {
  return Guard([&] {
    Require(run, "run");
    Require(key, "key");
    Require(value, "value");
    pipeline::RunConfig next = run->config;
    next.Set(key, value);
    next.Validate();
    run->config = std::move(next);
  });
}

pg_status pg_run_stage(pg_run* run, const char* stage) {
  return Guard([&] {
    Require(run, "run");
    Require(stage, "stage");
    pipeline::RunStage(run->config, stage);
  });
}

pg_status pg_run_all(pg_run* run) {
  return Guard([&] {
    Require(run, "run");
    pipeline::RunAll(run->config);
  });
}

pg_status pg_run_config_json(const pg_run* run, char** out) {
  return Guard([&] {
    Require(run, "run");
    Require(out, "out");
    *out = CopyString(run->config.doc().dump(2));
  });
}

size_t pg_stage_count(void) { return pipeline::StageNames().size(); }

const char* pg_stage_name(size_t i) {
  const auto& names = pipeline::StageNames();
  return i < names.size() ? names[i].c_str() : nullptr;
}

pg_status pg_registry_generate(const char* scenario_json, pg_registry** out) {
  return Guard([&] {
    Require(scenario_json, "scenario_json");
    Require(out, "out");
    *out = nullptr;
    Json doc = Json::parse(scenario_json, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw ConfigError("scenario is not a JSON object");
    Json merged = doc.contains("preset") ? pipeline::ScenarioPreset(doc["preset"].get<std::string>()).ToJson()
                                         : synthpop::ScenarioConfig{}.ToJson();
    for (const auto& [k, v] : doc.items()) {
      if (k != "preset") merged[k] = v;
    }
    auto reg = std::make_unique<pg_registry>();
    reg->registry = synthpop::GenerateRegistry(synthpop::ScenarioConfig::FromJson(merged));
    *out = reg.release();
  });
}

pg_status pg_registry_load(const char* dir, pg_registry** out) {
  return Guard([&] {
    Require(dir, "dir");
    Require(out, "out");
    *out = nullptr;
    auto reg = std::make_unique<pg_registry>();
    reg->registry = synthpop::LoadRegistry(dir);
    synthpop::ValidateRegistry(reg->registry);
    *out = reg.release();
  });
}

pg_status pg_registry_save(const pg_registry* registry, const char* dir) {
  return Guard([&] {
    Require(registry, "registry");
    Require(dir, "dir");
    std::filesystem::create_directories(dir);
    synthpop::SaveRegistry(registry->registry, dir);
  });
}

void pg_registry_destroy(pg_registry* registry) { delete registry; }

size_t pg_registry_num_children(const pg_registry* registry) {
  return registry ? registry->registry.children.size() : 0;
}

pg_status pg_registry_outcomes(const pg_registry* registry, int* out, size_t n) {
  return Guard([&] {
    Require(registry, "registry");
    Require(out, "out");
    const auto y = features::Outcomes(registry->registry);
    if (n != y.size()) throw InvalidArgument("buffer length differs from the child count");
    std::copy(y.begin(), y.end(), out);
  });
}

pg_status pg_model_load(const char* path, pg_model** out) {
  return Guard([&] {
    Require(path, "path");
    Require(out, "out");
    *out = nullptr;
    char magic[8] = {};
    {
      std::ifstream in(path, std::ios::binary);
      if (!in) throw DependencyError(std::string("cannot open model file '") + path + "'");
      in.read(magic, sizeof(magic));
    }
    auto m = std::make_unique<pg_model>();
    if (std::memcmp(magic, "PGGNN001", 8) == 0) {
      m->model = model_gnn::LoadGnnModel(path);
    } else {
      const Json j = ReadJsonFile(path);
      const std::string family = j.value("family", "");
      if (family == "linear") m->model = model_linear::LinearModel::FromJson(j);
      else if (family == "gbt") m->model = model_gbt::BoostModel::FromJson(j);
      else throw InvalidArgument(std::string("'") + path + "' is not a predgap model");
    }
    *out = m.release();
  });
}

void pg_model_destroy(pg_model* model) { delete model; }

const char* pg_model_family(const pg_model* model) {
  if (!model) return "";
  switch (model->model.index()) {
    case 0: return "linear";
    case 1: return "gbt";
    default: return "gnn";
  }
}

pg_status pg_model_predict(const pg_model* model, const pg_registry* registry, double* out, size_t n) {
  return Guard([&] {
    Require(model, "model");
    Require(registry, "registry");
    Require(out, "out");
    const auto& reg = registry->registry;
    if (n != reg.children.size()) throw InvalidArgument("buffer length differs from the child count");
    std::vector<double> p;
    if (const auto* lm = std::get_if<model_linear::LinearModel>(&model->model)) {
      p = model_linear::PredictProba(*lm, features::BuildFeatureTable(reg, ContextOf(lm->feature_names)));
    } else if (const auto* bm = std::get_if<model_gbt::BoostModel>(&model->model)) {
      p = model_gbt::PredictProba(*bm, features::BuildFeatureTable(reg, ContextOf(bm->feature_names)));
    } else {
      const auto& gm = std::get<model_gnn::GnnModel>(model->model);
      p = model_gnn::PredictProba(gm, hetgraph::BuildHeteroGraph(reg, features::ContextSetSpec::Parse(gm.context)));
    }
    std::copy(p.begin(), p.end(), out);
  });
}

pg_status pg_mcc(const int* y_true, const int* y_pred, size_t n, double* out) {
  return Guard([&] {
    Require(y_true, "y_true");
    Require(y_pred, "y_pred");
    Require(out, "out");
    *out = evalgap::Mcc(std::span<const int>(y_true, n), std::span<const int>(y_pred, n));
  });
}

pg_status pg_auc(const int* y_true, const double* probabilities, size_t n, double* out) {
  return Guard([&] {
    Require(y_true, "y_true");
    Require(probabilities, "probabilities");
    Require(out, "out");
    *out = evalgap::Auc(std::span<const int>(y_true, n), std::span<const double>(probabilities, n));
  });
}

pg_status pg_agreement(const int* y_true, const int* pred_a, const int* pred_b, size_t n, pg_agreement_counts* out) {
  return Guard([&] {
    Require(y_true, "y_true");
    Require(pred_a, "pred_a");
    Require(pred_b, "pred_b");
    Require(out, "out");
    const auto t = evalgap::AgreementTable(std::span<const int>(y_true, n), std::span<const int>(pred_a, n),
                                           std::span<const int>(pred_b, n));
    *out = pg_agreement_counts{t.n, t.both_agreeing, t.both_correct, t.both_wrong, t.only_a_correct,
                               t.only_b_correct};
  });
}

}  // extern "C"
