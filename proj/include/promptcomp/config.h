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

#ifndef PROMPTCOMP_CONFIG_H_
#define PROMPTCOMP_CONFIG_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "json.hpp"
#include "promptcomp/adaptive_predictor.h"
#include "promptcomp/composition_space.h"
#include "promptcomp/llm_gateway.h"
#include "promptcomp/prompt_builder.h"

namespace promptcomp {

struct ConfigError {
  std::string pointer;  // JSON pointer into the config, e.g. "/gateway/max_retries"
  std::string message;
};

std::string FormatErrors(const std::vector<ConfigError>& errors);

// A validated run configuration. Relative paths are resolved against the
// directory of the config file.
struct RunConfig {
  std::optional<CompositionSpace> space;
  std::string templates_manifest;
  std::vector<std::string> corpus_paths;
  std::string output_dir;
  GatewayConfig gateway;
  DemonstrationConfig demonstrations;
  int64_t collection_seed = 0;
  TrainConfig train;
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string game_split = "validation";
  std::string metric = "macro_f1";
  std::string eval_split = "test";
  int ensemble_tie_label = 0;
  bool random_uses_prior = false;
  std::vector<uint64_t> random_seeds = {1, 2, 3, 4, 5};
  bool welch = false;

  // The config with every default filled in (paths as written).
  nlohmann::json normalized;
};

// Schema check with defaults. Every problem is reported, each with the JSON
// pointer of the offending value. `base_dir` resolves relative paths.
absl::StatusOr<RunConfig> ValidateConfigJson(const nlohmann::json& json,
                                             const std::string& base_dir,
                                             std::vector<ConfigError>* errors);

absl::StatusOr<RunConfig> LoadConfig(const std::string& path,
                                     std::vector<ConfigError>* errors);

}  // namespace promptcomp

#endif  // PROMPTCOMP_CONFIG_H_
