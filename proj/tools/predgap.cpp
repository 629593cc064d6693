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

// Command-line front end. Every command runs one pipeline stage through the
// C API; options map onto run-config keys.

#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "predgap/predgap.h"

namespace {

struct Options {
  std::optional<std::string> config;
  std::optional<std::string> out;
  std::optional<std::string> registry;
  std::optional<std::string> models;
  std::optional<std::string> context;
  std::optional<std::string> preset;
  std::optional<double> threshold;
  std::optional<int> resamples;
  std::optional<int> budget;
  std::vector<std::string> sets;
  bool quiet = false;
};

void AddCommon(CLI::App* cmd, Options& o, bool synth) {
  cmd->add_option("-c,--config", o.config, "Run config (JSON); a bare scenario document is accepted too")
      ->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", o.out, synth ? "Registry directory to write" : "Run output directory");
  if (!synth) cmd->add_option("--registry", o.registry, "Registry directory");
  cmd->add_option("--set", o.sets, "Override a config key, e.g. --set bootstrap.seed=7")->type_name("KEY=VALUE");
  cmd->add_flag("-q,--quiet", o.quiet, "No progress messages");
  if (synth) {
    cmd->add_option("--preset", o.preset, "Scenario preset: none, linear, interaction, network, nested");
  } else {
    cmd->add_option("--models", o.models, "Model families, e.g. linear,gbt,gnn");
    cmd->add_option("--context", o.context, "Context set: demographics ... full, or letters like I,F,H");
    cmd->add_option("--threshold", o.threshold, "Classification threshold");
    cmd->add_option("--resamples", o.resamples, "Bootstrap resamples");
    cmd->add_option("--budget", o.budget, "Tuning trials for every family");
  }
}

std::vector<std::string> Overrides(const Options& o, bool synth) {
  std::vector<std::string> out;
  if (o.out) out.push_back((synth ? "registry_dir=" : "out_dir=") + *o.out);
  if (o.registry) out.push_back("registry_dir=" + *o.registry);
  if (o.preset) out.push_back("scenario.preset=" + *o.preset);
  if (o.models) {
    // A single family still needs to become a list.
    out.push_back("models=" + (o.models->find(',') == std::string::npos ? "[\"" + *o.models + "\"]" : *o.models));
  }
  if (o.context) out.push_back("context=" + *o.context);
  if (o.threshold) out.push_back("threshold=" + std::to_string(*o.threshold));
  if (o.resamples) out.push_back("bootstrap.n_resamples=" + std::to_string(*o.resamples));
  if (o.budget) {
    out.push_back("tuning.gbt_budget=" + std::to_string(*o.budget));
    out.push_back("tuning.gnn_budget=" + std::to_string(*o.budget));
  }
  out.insert(out.end(), o.sets.begin(), o.sets.end());
  return out;
}

int Report(pg_status s) {
  if (s != PG_OK) std::fprintf(stderr, "predgap: error: %s\n", pg_last_error());
  return static_cast<int>(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prediction-gap analysis pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pg_version());

  Options opts;
  std::map<CLI::App*, std::string> commands;
  const std::map<std::string, std::string> help = {
      {"synth", "Generate a synthetic registry"},
      {"prep", "Build model inputs and the graph"},
      {"split", "Draw the train/test split"},
      {"tune", "Random hyperparameter search on the training rows"},
      {"train", "Fit every selected model family"},
      {"eval", "Score the test rows with bootstrap intervals"},
      {"gap", "Paired-bootstrap prediction gaps"},
      {"nested", "Refit over the nested context sets"},
      {"disagg", "Subgroup metrics and gaps"},
      {"agree", "Agreement tables between model pairs"},
      {"sweep", "F1 across classification thresholds"},
      {"embed", "PCA of graph-network embeddings"},
      {"report", "Check every stage and write the run manifest"},
      {"all", "Run every stage in order"}};
  for (size_t i = 0; i <= pg_stage_count(); ++i) {
    const char* name = i < pg_stage_count() ? pg_stage_name(i) : "all";
    CLI::App* cmd = app.add_subcommand(name, help.at(name));
    AddCommon(cmd, opts, std::string(name) == "synth");
    commands[cmd] = name;
  }
  CLI11_PARSE(app, argc, argv);

  std::string command;
  for (const auto& [cmd, name] : commands) {
    if (cmd->parsed()) command = name;
  }
  if (opts.quiet) pg_set_log_callback(nullptr, nullptr);

  const auto overrides = Overrides(opts, command == "synth");
  std::vector<const char*> raw;
  for (const auto& s : overrides) raw.push_back(s.c_str());
  pg_run* run = nullptr;
  if (const pg_status s = pg_run_create(opts.config ? opts.config->c_str() : nullptr, raw.data(), raw.size(), &run);
      s != PG_OK) {
    return Report(s);
  }
  const pg_status s = command == "all" ? pg_run_all(run) : pg_run_stage(run, command.c_str());
  pg_run_destroy(run);
  return Report(s);
}
