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

#include "promptcomp/config.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "absl/strings/match.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "promptcomp/corpus_store.h"
#include "promptcomp/metrics.h"

namespace promptcomp {
namespace {

// JSON integers written in code are signed even when non-negative.
bool IsNonNegativeInteger(const nlohmann::json& v) {
  return v.is_number_unsigned() ||
         (v.is_number_integer() && v.get<int64_t>() >= 0);
}

// Gateway messages start with the offending key (or name it in quotes for
// unknown keys); map them back to a pointer.
std::string GatewayErrorPointer(const std::string& message) {
  static constexpr const char* kKeys[] = {
      "reasoning_max_tokens", "label_max_tokens", "backoff_base_ms",
      "max_in_flight",        "max_retries",      "timeout_ms",
      "endpoint",             "model_id",         "allowed_labels",
      "output_format",        "api_key_env"};
  if (absl::StartsWith(message, "unknown key '")) {
    const size_t begin = message.find('\'') + 1;
    const size_t end = message.find('\'', begin);
    if (end != std::string::npos) {
      return absl::StrCat("/gateway/", message.substr(begin, end - begin));
    }
  }
  for (const char* key : kKeys) {
    if (absl::StartsWith(message, key)) return absl::StrCat("/gateway/", key);
  }
  if (absl::StartsWith(message, "label")) return "/gateway/allowed_labels";
  return "/gateway";
}

namespace fs = std::filesystem;

std::string Resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

// Collects errors for one config object and reads typed keys from it.
class Reader {
 public:
  Reader(const nlohmann::json& object, std::string pointer,
         std::vector<ConfigError>& errors)
      : object_(object), pointer_(std::move(pointer)), errors_(errors) {}

  void Error(const std::string& key, std::string message) {
    errors_.push_back({key.empty() ? pointer_ : absl::StrCat(pointer_, "/", key),
                       std::move(message)});
  }

  void AllowOnly(std::initializer_list<const char*> keys) {
    if (!object_.is_object()) return;
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [key, value] : object_.items()) {
      if (!allowed.contains(key)) Error(key, "unknown key");
    }
  }

  bool Has(const std::string& key) const {
    return object_.is_object() && object_.contains(key);
  }
  const nlohmann::json& At(const std::string& key) const { return object_[key]; }

  template <typename T>
  void Number(const std::string& key, T& out) {
    if (!Has(key)) return;
    const nlohmann::json& v = object_[key];
    if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) return Error(key, "expected a number");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!IsNonNegativeInteger(v)) {
        return Error(key, "expected a non-negative integer");
      }
    } else {
      if (!v.is_number_integer()) return Error(key, "expected an integer");
    }
    out = v.get<T>();
  }

  void String(const std::string& key, std::string& out) {
    if (!Has(key)) return;
    if (!object_[key].is_string()) return Error(key, "expected a string");
    out = object_[key].get<std::string>();
  }

  void Bool(const std::string& key, bool& out) {
    if (!Has(key)) return;
    if (!object_[key].is_boolean()) return Error(key, "expected a boolean");
    out = object_[key].get<bool>();
  }

  void Seeds(const std::string& key, std::vector<uint64_t>& out) {
    if (!Has(key)) return;
    const nlohmann::json& v = object_[key];
    if (!v.is_array() || v.empty()) {
      return Error(key, "expected a non-empty array of seeds");
    }
    std::vector<uint64_t> seeds;
    for (size_t i = 0; i < v.size(); ++i) {
      if (!IsNonNegativeInteger(v[i])) {
        return Error(absl::StrCat(key, "/", i), "expected a non-negative integer");
      }
      seeds.push_back(v[i].get<uint64_t>());
    }
    out = std::move(seeds);
  }

 private:
  const nlohmann::json& object_;
  std::string pointer_;
  std::vector<ConfigError>& errors_;
};

// Manifest key holding the template of a technique.
std::vector<std::string> TemplateKeysFor(const std::string& technique) {
  if (technique == kReasoning) return {std::string(kReasoning), "reasoning_final"};
  return {technique};
}

void CheckTemplates(const RunConfig& config, std::vector<ConfigError>& errors) {
  const std::string& path = config.templates_manifest;
  std::ifstream in(path);
  if (!in) {
    errors.push_back({"/templates", absl::StrCat("file not found: ", path)});
    return;
  }
  const nlohmann::json manifest = nlohmann::json::parse(in, nullptr, false);
  if (manifest.is_discarded() || !manifest.is_object()) {
    errors.push_back({"/templates", "manifest must be a JSON object"});
    return;
  }
  const fs::path base = fs::path(path).parent_path();
  bool files_ok = true;
  for (const auto& [key, value] : manifest.items()) {
    if (key == "stimulus_categories" || key == "positive_output" ||
        key == "negative_output" || !value.is_string()) {
      continue;
    }
    const fs::path file = base / value.get<std::string>();
    if (!fs::exists(file)) {
      files_ok = false;
      errors.push_back({"/templates", absl::StrCat("template file for '", key,
                                                   "' not found: ", file.string())});
    }
  }
  if (!manifest.contains("task_description")) {
    errors.push_back({"/templates", "manifest lacks 'task_description'"});
  }
  if (config.space) {
    for (const Technique& t : config.space->techniques()) {
      for (const std::string& key : TemplateKeysFor(t.name)) {
        if (!manifest.contains(key)) {
          files_ok = false;
          errors.push_back({"/templates",
                            absl::StrCat("no template for technique '", t.name,
                                         "' (manifest key '", key, "')")});
        }
      }
    }
  }
  if (files_ok) {
    absl::StatusOr<TemplateSet> loaded = LoadTemplateManifest(path);
    if (!loaded.ok()) {
      errors.push_back({"/templates", std::string(loaded.status().message())});
    }
  }
}

}  // namespace

std::string FormatErrors(const std::vector<ConfigError>& errors) {
  std::vector<std::string> lines;
  for (const ConfigError& e : errors) {
    lines.push_back(absl::StrCat(e.pointer.empty() ? "/" : e.pointer, ": ",
                                 e.message));
  }
  return absl::StrJoin(lines, "\n");
}

absl::StatusOr<RunConfig> ValidateConfigJson(const nlohmann::json& json,
                                             const std::string& base_dir,
                                             std::vector<ConfigError>* errors_out) {
  std::vector<ConfigError> errors;
  RunConfig config;
  if (!json.is_object()) {
    errors.push_back({"", "config must be a JSON object"});
    if (errors_out) *errors_out = errors;
    return absl::InvalidArgumentError(FormatErrors(errors));
  }
  Reader root(json, "", errors);
  root.AllowOnly({"space", "templates", "corpus", "output_dir", "gateway",
                  "demonstrations", "collection_seed", "train", "seeds", "game",
                  "evaluation"});
  nlohmann::json normalized = json;

  // Space: "default" or a technique list.
  nlohmann::json space_json = "default";
  if (root.Has("space")) space_json = json["space"];
  if (space_json.is_string() && space_json.get<std::string>() == "default") {
    config.space = DefaultBiasDetectionSpace();
  } else if (space_json.is_array()) {
    std::set<std::string> seen;
    bool ok = true;
    for (size_t i = 0; i < space_json.size(); ++i) {
      const nlohmann::json& entry = space_json[i];
      if (!entry.is_object() || !entry.contains("name") ||
          !entry["name"].is_string()) {
        errors.push_back({absl::StrCat("/space/", i, "/name"), "expected a string"});
        ok = false;
        continue;
      }
      const std::string name = entry["name"].get<std::string>();
      if (!seen.insert(name).second) {
        errors.push_back({absl::StrCat("/space/", i, "/name"),
                          absl::StrCat("duplicate technique '", name, "'")});
        ok = false;
      }
    }
    if (ok) {
      absl::StatusOr<CompositionSpace> space = CompositionSpace::FromJson(space_json);
      if (space.ok()) {
        config.space = *std::move(space);
      } else {
        errors.push_back({"/space", std::string(space.status().message())});
      }
    }
  } else {
    errors.push_back({"/space", "expected \"default\" or an array of techniques"});
  }
  if (config.space) normalized["space"] = config.space->ToJson();

  // Templates.
  std::string templates;
  if (!root.Has("templates")) {
    errors.push_back({"/templates", "required"});
  } else {
    root.String("templates", templates);
    config.templates_manifest = Resolve(base_dir, templates);
    if (!templates.empty()) CheckTemplates(config, errors);
  }

  // Corpus: a path or an array of paths.
  if (!root.Has("corpus")) {
    errors.push_back({"/corpus", "required"});
  } else {
    const nlohmann::json& corpus = json["corpus"];
    std::vector<std::pair<std::string, std::string>> entries;
    if (corpus.is_string()) {
      entries.push_back({"/corpus", corpus.get<std::string>()});
    } else if (corpus.is_array() && !corpus.empty()) {
      for (size_t i = 0; i < corpus.size(); ++i) {
        if (!corpus[i].is_string()) {
          errors.push_back({absl::StrCat("/corpus/", i), "expected a path"});
        } else {
          entries.push_back({absl::StrCat("/corpus/", i), corpus[i].get<std::string>()});
        }
      }
    } else {
      errors.push_back({"/corpus", "expected a path or a non-empty array of paths"});
    }
    for (const auto& [pointer, path] : entries) {
      const std::string resolved = Resolve(base_dir, path);
      if (!fs::exists(resolved)) {
        errors.push_back({pointer, absl::StrCat("file not found: ", resolved)});
      }
      config.corpus_paths.push_back(resolved);
    }
  }

  std::string output_dir = "out";
  root.String("output_dir", output_dir);
  config.output_dir = Resolve(base_dir, output_dir);
  normalized["output_dir"] = output_dir;

  root.Number("collection_seed", config.collection_seed);
  normalized["collection_seed"] = config.collection_seed;
  root.Seeds("seeds", config.seeds);
  normalized["seeds"] = config.seeds;

  // Gateway.
  if (root.Has("gateway")) {
    absl::StatusOr<GatewayConfig> gateway = GatewayConfig::FromJson(json["gateway"]);
    if (gateway.ok()) {
      config.gateway = *std::move(gateway);
    } else {
      const std::string message(gateway.status().message());
      errors.push_back({GatewayErrorPointer(message), message});
    }
  }
  normalized["gateway"] = config.gateway.ToJson();

  // Demonstrations: k and seed; the strategy follows the variant.
  if (root.Has("demonstrations")) {
    Reader demos(json["demonstrations"], "/demonstrations", errors);
    if (!json["demonstrations"].is_object()) {
      demos.Error("", "expected an object");
    } else {
      demos.AllowOnly({"k", "seed", "strategy"});
      demos.Number("k", config.demonstrations.k);
      demos.Number("seed", config.demonstrations.seed);
      if (config.demonstrations.k < 1) demos.Error("k", "must be >= 1");
      std::string strategy;
      demos.String("strategy", strategy);
      if (!strategy.empty()) {
        absl::StatusOr<DemoStrategy> parsed = ParseDemoStrategy(strategy);
        if (parsed.ok()) {
          config.demonstrations.strategy = *parsed;
        } else {
          demos.Error("strategy", std::string(parsed.status().message()));
        }
      }
    }
  }
  normalized["demonstrations"] = {{"k", config.demonstrations.k},
                                  {"seed", config.demonstrations.seed}};

  // Training.
  if (root.Has("train")) {
    absl::StatusOr<TrainConfig> train = TrainConfig::FromJson(json["train"]);
    if (!json["train"].is_object()) {
      errors.push_back({"/train", "expected an object"});
    } else if (train.ok()) {
      config.train = *train;
      Reader(json["train"], "/train", errors)
          .AllowOnly({"learning_rate", "epochs", "batch_size", "seed", "l2", "dim"});
    } else {
      errors.push_back({"/train", std::string(train.status().message())});
    }
  }
  normalized["train"] = config.train.ToJson();

  // Game.
  if (root.Has("game")) {
    Reader game(json["game"], "/game", errors);
    game.AllowOnly({"split", "metric"});
    game.String("split", config.game_split);
    game.String("metric", config.metric);
    if (!ParseSplit(config.game_split).ok()) {
      game.Error("split", "expected train, validation or test");
    }
    if (!MetricByName(config.metric).ok()) {
      game.Error("metric", "expected macro_f1 or accuracy");
    }
  }
  normalized["game"] = {{"split", config.game_split}, {"metric", config.metric}};

  // Evaluation.
  if (root.Has("evaluation")) {
    Reader eval(json["evaluation"], "/evaluation", errors);
    eval.AllowOnly({"split", "ensemble_tie_label", "random_uses_prior",
                    "random_seeds", "welch"});
    eval.String("split", config.eval_split);
    eval.Number("ensemble_tie_label", config.ensemble_tie_label);
    eval.Bool("random_uses_prior", config.random_uses_prior);
    eval.Seeds("random_seeds", config.random_seeds);
    eval.Bool("welch", config.welch);
    if (!ParseSplit(config.eval_split).ok()) {
      eval.Error("split", "expected train, validation or test");
    }
    if (config.ensemble_tie_label != 0 && config.ensemble_tie_label != 1) {
      eval.Error("ensemble_tie_label", "must be 0 or 1");
    }
  }
  normalized["evaluation"] = {{"split", config.eval_split},
                              {"ensemble_tie_label", config.ensemble_tie_label},
                              {"random_uses_prior", config.random_uses_prior},
                              {"random_seeds", config.random_seeds},
                              {"welch", config.welch}};

  if (errors_out) *errors_out = errors;
  if (!errors.empty()) return absl::InvalidArgumentError(FormatErrors(errors));
  config.normalized = std::move(normalized);
  return config;
}

absl::StatusOr<RunConfig> LoadConfig(const std::string& path,
                                     std::vector<ConfigError>* errors) {
  std::ifstream in(path);
  if (!in) {
    if (errors) *errors = {{"", absl::StrCat("cannot open ", path)}};
    return absl::NotFoundError(absl::StrCat("cannot open ", path));
  }
  const nlohmann::json json = nlohmann::json::parse(in, nullptr, false);
  if (json.is_discarded()) {
    if (errors) *errors = {{"", absl::StrCat(path, ": not valid JSON")}};
    return absl::InvalidArgumentError(absl::StrCat(path, ": not valid JSON"));
  }
  const std::string base_dir =
      fs::absolute(fs::path(path)).parent_path().string();
  return ValidateConfigJson(json, base_dir, errors);
}

}  // namespace promptcomp
