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

#ifndef PROMPTCOMP_PIPELINE_H_
#define PROMPTCOMP_PIPELINE_H_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "json.hpp"
#include "promptcomp/adaptive_predictor.h"
#include "promptcomp/config.h"
#include "promptcomp/corpus_store.h"
#include "promptcomp/evaluation.h"
#include "promptcomp/game_shapley.h"
#include "promptcomp/llm_gateway.h"
#include "promptcomp/prediction_cache.h"

namespace promptcomp {

// What a step wrote (paths relative to the output directory) plus a small
// JSON summary for the console.
struct StepOutput {
  std::vector<std::string> artifacts;
  nlohmann::json summary = nlohmann::json::object();
};

struct CollectSummary {
  StepOutput output;
  int64_t records = 0;
  int64_t upstream_calls = 0;
  int64_t cache_hits = 0;
  int64_t null_count = 0;
};

// Artifacts under the output directory:
//   cache.jsonl                       prediction cache
//   matrices/<split>.{pred,correct}.csv
//   games/<fixing>.csv
//   shapley/<fixing>.{json,force.json,network.json,force.svg,network.svg}
//   selections/<fixing>.json
//   models/seed-<s>.pclm
//   predictions/seed-<s>.<split>.csv
//   evaluation.json, report.json, report.md
//   manifests/<command>.json
class Pipeline {
 public:
  // `backend` overrides the one built from the gateway config.
  static absl::StatusOr<std::unique_ptr<Pipeline>> Create(
      RunConfig config, std::unique_ptr<CompletionBackend> backend = nullptr,
      SleepFn sleep = {});

  const RunConfig& config() const { return config_; }
  const CompositionSpace& space() const { return *config_.space; }
  const std::vector<Instance>& corpus() const { return corpus_; }
  const std::string& output_dir() const { return config_.output_dir; }
  int64_t backend_calls() const { return backend_->calls(); }

  // Labels every instance of `splits` under every composition.
  absl::StatusOr<CollectSummary> Collect(const std::vector<Split>& splits);

  // Label matrix of a split from the cache; fails if pairs are missing.
  absl::StatusOr<LabelMatrix> Matrix(Split split) const;

  // Variant fixings to process: `fixing` if given, else all of them.
  std::vector<std::vector<int>> Fixings(
      const std::optional<std::vector<int>>& fixing) const;

  absl::StatusOr<StepOutput> Game(const std::optional<std::vector<int>>& fixing);
  absl::StatusOr<StepOutput> Shapley(const std::optional<std::vector<int>>& fixing);
  absl::StatusOr<StepOutput> Select(const std::optional<std::vector<int>>& fixing);

  // One model per seed (the config's seeds unless `seeds` is non-empty).
  absl::StatusOr<StepOutput> Train(const std::vector<uint64_t>& seeds = {});
  // Loads the seed's model, training it first if absent.
  absl::StatusOr<HashedLinearModel> ModelForSeed(uint64_t seed);
  absl::StatusOr<StepOutput> Predict(uint64_t seed, Split split);

  absl::StatusOr<EvalReport> BuildReport();
  absl::StatusOr<StepOutput> Evaluate();
  absl::StatusOr<StepOutput> Report();

  // Writes manifests/<command>.json listing `output`'s artifacts with hashes.
  absl::Status WriteManifest(const std::string& command, const StepOutput& output,
                             const std::string& started_at) const;

 private:
  Pipeline(RunConfig config, std::unique_ptr<CompletionBackend> backend,
           SleepFn sleep);

  std::string Path(const std::string& relative) const;
  absl::Status WriteText(const std::string& relative, const std::string& text,
                         StepOutput& output) const;
  absl::StatusOr<ShapleySelectionRow> BestShapleyRow(ReconstructionMode mode,
                                                     const LabelMatrix& game_matrix,
                                                     const std::vector<double>& eval_f1);

  RunConfig config_;
  std::unique_ptr<CompletionBackend> backend_;
  Gateway gateway_;
  std::vector<Instance> corpus_;
  TemplateSet templates_;
  std::unique_ptr<PredictionCache> cache_;
};

// File-name form of a variant fixing, e.g. "demonstrations-similarity".
std::string FixingTag(const CompositionSpace& space, const std::vector<int>& fixing);

// Current UTC time, ISO 8601.
std::string UtcNow();

}  // namespace promptcomp

#endif  // PROMPTCOMP_PIPELINE_H_
