// Copyright 2026 The promptcomp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// promptcomp: enumerate prompt compositions, collect labels, attribute
// performance to techniques, train the per-instance selector and report.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "json.hpp"
#include "promptcomp/adaptive_predictor.h"
#include "promptcomp/composition_space.h"
#include "promptcomp/config.h"
#include "promptcomp/corpus_store.h"
#include "promptcomp/game_shapley.h"
#include "promptcomp/pipeline.h"
#include "promptcomp/synthetic.h"

namespace {

using promptcomp::Pipeline;
using promptcomp::RunConfig;
using promptcomp::Split;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitPartial = 2;
constexpr int kExitUsage = 64;

struct Flags {
  std::string config;
  std::string output_dir;
  std::string endpoint;
  std::string model_id;
  int max_in_flight = 0;
  bool allow_partial = false;
  bool json = false;
  std::vector<std::string> splits;
  std::vector<std::string> fixing;
  std::vector<uint64_t> seeds;
  std::string split = "test";
  std::string text;
  // synth
  std::string out;
  promptcomp::PlantedCorpusOptions planted;
};

int Fail(const absl::Status& status) {
  std::cerr << "error: " << status.message() << "\n";
  return kExitError;
}

absl::StatusOr<RunConfig> LoadWithOverrides(const Flags& flags) {
  if (flags.config.empty()) {
    return absl::InvalidArgumentError("--config is required");
  }
  std::vector<promptcomp::ConfigError> errors;
  absl::StatusOr<RunConfig> config = promptcomp::LoadConfig(flags.config, &errors);
  if (!config.ok()) {
    return absl::InvalidArgumentError(
        absl::StrCat("invalid config ", flags.config, ":\n",
                     errors.empty() ? std::string(config.status().message())
                                    : promptcomp::FormatErrors(errors)));
  }
  if (!flags.output_dir.empty()) {
    config->output_dir = flags.output_dir;
    config->normalized["output_dir"] = flags.output_dir;
  }
  if (!flags.endpoint.empty()) config->gateway.endpoint = flags.endpoint;
  if (!flags.model_id.empty()) config->gateway.model_id = flags.model_id;
  if (flags.max_in_flight > 0) config->gateway.max_in_flight = flags.max_in_flight;
  if (absl::Status s = config->gateway.Validate(); !s.ok()) return s;
  config->normalized["gateway"] = config->gateway.ToJson();
  if (!flags.seeds.empty()) {
    config->seeds = flags.seeds;
    config->normalized["seeds"] = flags.seeds;
  }
  return config;
}

absl::StatusOr<std::optional<std::vector<int>>> Fixing(const Pipeline& pipeline,
                                                       const Flags& flags) {
  if (flags.fixing.empty()) return std::optional<std::vector<int>>();
  absl::StatusOr<std::vector<int>> fixing =
      promptcomp::ParseVariantFixing(pipeline.space(), flags.fixing);
  if (!fixing.ok()) return fixing.status();
  return std::optional<std::vector<int>>(*std::move(fixing));
}

void PrintSummary(const std::string& command, const promptcomp::StepOutput& out) {
  std::cout << nlohmann::json{{"command", command},
                              {"summary", out.summary},
                              {"artifacts", out.artifacts}}
                   .dump(2)
            << "\n";
}

int Enumerate(const Flags& flags) {
  std::optional<promptcomp::CompositionSpace> space;
  if (flags.config.empty()) {
    space = promptcomp::DefaultBiasDetectionSpace();
  } else {
    absl::StatusOr<RunConfig> config = LoadWithOverrides(flags);
    if (!config.ok()) return Fail(config.status());
    space = *config->space;
  }
  absl::StatusOr<std::vector<promptcomp::Composition>> all = space->Enumerate();
  if (!all.ok()) return Fail(all.status());
  if (flags.json) {
    nlohmann::json rows = nlohmann::json::array();
    for (size_t id = 0; id < all->size(); ++id) {
      rows.push_back({{"id", id},
                      {"composition", space->Describe((*all)[id])},
                      {"selection", (*all)[id].selection}});
    }
    std::cout << nlohmann::json{{"count", all->size()}, {"compositions", rows}}.dump(2)
              << "\n";
    return kExitOk;
  }
  std::cout << "compositions: " << all->size() << "\n";
  for (size_t id = 0; id < all->size(); ++id) {
    std::cout << id << "\t" << space->Describe((*all)[id]) << "\n";
  }
  return kExitOk;
}

int Validate(const Flags& flags) {
  if (flags.config.empty()) {
    std::cerr << "error: --config is required\n";
    return kExitError;
  }
  std::vector<promptcomp::ConfigError> errors;
  absl::StatusOr<RunConfig> config = promptcomp::LoadConfig(flags.config, &errors);
  if (!config.ok()) {
    std::cerr << (errors.empty() ? std::string(config.status().message())
                                 : promptcomp::FormatErrors(errors))
              << "\n";
    return kExitError;
  }
  std::cout << config->normalized.dump(2) << "\n";
  return kExitOk;
}

int Synth(const Flags& flags) {
  if (flags.out.empty()) {
    std::cerr << "error: --out is required\n";
    return kExitError;
  }
  const std::vector<promptcomp::Instance> corpus =
      promptcomp::GeneratePlantedCorpus(flags.planted);
  if (absl::Status s = promptcomp::WriteCorpus(flags.out, corpus); !s.ok()) {
    return Fail(s);
  }
  std::cout << "wrote " << corpus.size() << " instances to " << flags.out << "\n";
  return kExitOk;
}

// Runs a pipeline step, writes its manifest and prints its summary.
int Step(const std::string& command, Pipeline& pipeline,
         const std::function<absl::StatusOr<promptcomp::StepOutput>()>& step) {
  const std::string started = promptcomp::UtcNow();
  absl::StatusOr<promptcomp::StepOutput> out = step();
  if (!out.ok()) return Fail(out.status());
  if (absl::Status s = pipeline.WriteManifest(command, *out, started); !s.ok()) {
    return Fail(s);
  }
  PrintSummary(command, *out);
  return kExitOk;
}

int Collect(Pipeline& pipeline, const Flags& flags) {
  std::vector<Split> splits;
  for (const std::string& name : flags.splits) {
    absl::StatusOr<Split> split = promptcomp::ParseSplit(name);
    if (!split.ok()) return Fail(split.status());
    splits.push_back(*split);
  }
  if (splits.empty()) splits = {Split::kTrain, Split::kValidation, Split::kTest};
  const std::string started = promptcomp::UtcNow();
  absl::StatusOr<promptcomp::CollectSummary> summary = pipeline.Collect(splits);
  if (!summary.ok()) return Fail(summary.status());
  if (absl::Status s = pipeline.WriteManifest("collect", summary->output, started);
      !s.ok()) {
    return Fail(s);
  }
  PrintSummary("collect", summary->output);
  std::cerr << "upstream calls: " << summary->upstream_calls
            << ", cache hits: " << summary->cache_hits
            << ", null labels: " << summary->null_count << "\n";
  if (summary->null_count > 0 && !flags.allow_partial) {
    std::cerr << "collection is partial; rerun to retry or pass --allow-partial\n";
    return kExitPartial;
  }
  return kExitOk;
}

int RunPipelineCommand(const std::string& command, const Flags& flags) {
  absl::StatusOr<RunConfig> config = LoadWithOverrides(flags);
  if (!config.ok()) return Fail(config.status());
  absl::StatusOr<std::unique_ptr<Pipeline>> created =
      Pipeline::Create(*std::move(config));
  if (!created.ok()) return Fail(created.status());
  Pipeline& pipeline = **created;

  if (command == "collect") return Collect(pipeline, flags);

  absl::StatusOr<std::optional<std::vector<int>>> fixing = Fixing(pipeline, flags);
  if (!fixing.ok()) return Fail(fixing.status());
  if (command == "game") {
    return Step(command, pipeline, [&] { return pipeline.Game(*fixing); });
  }
  if (command == "shapley") {
    return Step(command, pipeline, [&] { return pipeline.Shapley(*fixing); });
  }
  if (command == "select") {
    return Step(command, pipeline, [&] { return pipeline.Select(*fixing); });
  }
  if (command == "train") {
    return Step(command, pipeline, [&] { return pipeline.Train(flags.seeds); });
  }
  if (command == "predict") {
    const uint64_t seed =
        flags.seeds.empty() ? pipeline.config().seeds.front() : flags.seeds.front();
    if (!flags.text.empty()) {
      absl::StatusOr<promptcomp::HashedLinearModel> model = pipeline.ModelForSeed(seed);
      if (!model.ok()) return Fail(model.status());
      absl::StatusOr<std::vector<double>> scores =
          promptcomp::PredictScores(*model, pipeline.space(), flags.text);
      if (!scores.ok()) return Fail(scores.status());
      const promptcomp::CompositionId id = promptcomp::ArgmaxLowestId(*scores);
      absl::StatusOr<promptcomp::Composition> comp = pipeline.space().Decode(id);
      if (!comp.ok()) return Fail(comp.status());
      std::cout << nlohmann::json{{"composition_id", id.value},
                                  {"composition", pipeline.space().Describe(*comp)},
                                  {"scores", *scores}}
                       .dump(2)
                << "\n";
      return kExitOk;
    }
    absl::StatusOr<Split> split = promptcomp::ParseSplit(flags.split);
    if (!split.ok()) return Fail(split.status());
    return Step(command, pipeline, [&] { return pipeline.Predict(seed, *split); });
  }
  if (command == "evaluate") {
    return Step(command, pipeline, [&] { return pipeline.Evaluate(); });
  }
  if (command == "report") {
    return Step(command, pipeline, [&] { return pipeline.Report(); });
  }
  if (command == "run") {
    const std::string started = promptcomp::UtcNow();
    const int collected = Collect(pipeline, flags);
    if (collected != kExitOk) return collected;
    promptcomp::StepOutput total;
    for (const auto& [name, step] :
         std::vector<std::pair<std::string,
                               std::function<absl::StatusOr<promptcomp::StepOutput>()>>>{
             {"game", [&] { return pipeline.Game(*fixing); }},
             {"shapley", [&] { return pipeline.Shapley(*fixing); }},
             {"select", [&] { return pipeline.Select(*fixing); }},
             {"train", [&] { return pipeline.Train(); }},
             {"evaluate", [&] { return pipeline.Evaluate(); }},
             {"report", [&] { return pipeline.Report(); }}}) {
      absl::StatusOr<promptcomp::StepOutput> out = step();
      if (!out.ok()) return Fail(out.status());
      if (absl::Status s = pipeline.WriteManifest(name, *out, promptcomp::UtcNow());
          !s.ok()) {
        return Fail(s);
      }
      PrintSummary(name, *out);
      total.artifacts.insert(total.artifacts.end(), out->artifacts.begin(),
                             out->artifacts.end());
      total.summary[name] = out->summary;
    }
    if (absl::Status s = pipeline.WriteManifest("run", total, started); !s.ok()) {
      return Fail(s);
    }
    return kExitOk;
  }
  std::cerr << "unknown command " << command << "\n";
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prompt-composition toolkit: enumerate, collect, attribute, "
               "train and evaluate."};
  app.require_subcommand(1);
  Flags flags;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", flags.config, "Run config (JSON)");
    sub->add_option("--output-dir", flags.output_dir, "Override output_dir");
    sub->add_option("--endpoint", flags.endpoint, "Override gateway endpoint");
    sub->add_option("--model-id", flags.model_id, "Override gateway model_id");
    sub->add_option("--max-in-flight", flags.max_in_flight,
                    "Override concurrent requests");
    sub->add_option("--seed", flags.seeds, "Seeds (repeatable)");
  };
  auto add_fixing = [&](CLI::App* sub) {
    sub->add_option("--fixing", flags.fixing,
                    "Variant fixing technique=variant (repeatable); default all");
  };

  CLI::App* enumerate = app.add_subcommand("enumerate", "Print |C| and all compositions");
  add_config(enumerate);
  enumerate->add_flag("--json", flags.json, "JSON output");

  CLI::App* validate = app.add_subcommand("validate", "Check a config, print it normalized");
  validate->add_option("-c,--config", flags.config, "Run config (JSON)")->required();

  CLI::App* synth = app.add_subcommand("synth", "Write the planted synthetic corpus");
  synth->add_option("--out", flags.out, "Output JSONL path")->required();
  synth->add_option("--train", flags.planted.train, "Training instances");
  synth->add_option("--validation", flags.planted.validation, "Validation instances");
  synth->add_option("--test", flags.planted.test, "Test instances");
  synth->add_option("--compositions", flags.planted.num_compositions,
                    "Number of compositions");
  synth->add_option("--corpus-seed", flags.planted.seed, "Generator seed");

  CLI::App* collect = app.add_subcommand("collect", "Label every (instance, composition)");
  add_config(collect);
  collect->add_option("--split", flags.splits, "Splits to label (default all)");
  collect->add_flag("--allow-partial", flags.allow_partial,
                    "Exit 0 even if some labels are null");

  std::vector<std::pair<std::string, CLI::App*>> steps;
  for (const auto& [name, help] :
       std::vector<std::pair<std::string, std::string>>{
           {"game", "Write composition games per variant fixing"},
           {"shapley", "Shapley values, interactions and plots per fixing"},
           {"select", "Reconstruction-based composition selection per fixing"},
           {"train", "Train the composition predictor per seed"},
           {"predict", "Select compositions for a split or a text"},
           {"evaluate", "Baselines, adaptive scores and significance"},
           {"report", "Markdown and JSON report"},
           {"run", "collect, game, shapley, select, train, evaluate, report"}}) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_config(sub);
    steps.emplace_back(name, sub);
  }
  for (const auto& [name, sub] : steps) {
    if (name == "game" || name == "shapley" || name == "select" || name == "run") {
      add_fixing(sub);
    }
    if (name == "predict") {
      sub->add_option("--split", flags.split, "Split to predict");
      sub->add_option("--text", flags.text, "Predict for this text instead");
    }
    if (name == "run") {
      sub->add_flag("--allow-partial", flags.allow_partial,
                    "Continue past null labels");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitUsage;
  }

  if (enumerate->parsed()) return Enumerate(flags);
  if (validate->parsed()) return Validate(flags);
  if (synth->parsed()) return Synth(flags);
  if (collect->parsed()) return RunPipelineCommand("collect", flags);
  for (const auto& [name, sub] : steps) {
    if (sub->parsed()) return RunPipelineCommand(name, flags);
  }
  std::cerr << app.help();
  return kExitUsage;
}
