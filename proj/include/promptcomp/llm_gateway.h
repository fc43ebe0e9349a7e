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

#ifndef PROMPTCOMP_LLM_GATEWAY_H_
#define PROMPTCOMP_LLM_GATEWAY_H_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "json.hpp"
#include "promptcomp/composition_space.h"
#include "promptcomp/corpus_store.h"
#include "promptcomp/prediction_cache.h"
#include "promptcomp/prompt_builder.h"

namespace promptcomp {

enum class OutputFormat {
  kBareLabel,
  // {"isBiased": "<label>"}; falls back to bare parsing.
  kJson,
};

struct GatewayConfig {
  // "mock:<rule>[?fail=<rate>&seed=<n>&fail_step=<k>]" or an http(s) URL of
  // an OpenAI-compatible completions or chat/completions endpoint.
  std::string endpoint = "mock:";
  std::string model_id = "mock";
  // Positive label first.
  std::pair<std::string, std::string> allowed_labels = {"Yes", "No"};
  OutputFormat output_format = OutputFormat::kBareLabel;
  int max_retries = 3;
  int backoff_base_ms = 200;
  int timeout_ms = 30000;
  int max_in_flight = 8;
  int label_max_tokens = 3;
  int reasoning_max_tokens = 256;
  std::string api_key_env = "OPENAI_API_KEY";

  absl::Status Validate() const;
  nlohmann::json ToJson() const;
  static absl::StatusOr<GatewayConfig> FromJson(const nlohmann::json& json);
};

struct CompletionRequest {
  std::string prompt;
  int max_tokens = 0;
  // Final, label-constrained call.
  bool constrained = false;
  // Test-double context; real endpoints ignore these.
  const Instance* instance = nullptr;
  CompositionId composition_id;
  uint64_t num_compositions = 0;
  int step = 1;  // 1-based position in the call chain
  int attempt = 0;
};

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  // Transport failures and non-2xx responses are non-OK statuses.
  virtual absl::StatusOr<std::string> Complete(const CompletionRequest& request) = 0;
  virtual int64_t calls() const = 0;
};

enum class MockRule {
  // Pseudo-random label from (instance, composition, seed).
  kHash,
  // Correct only for the instance's planted composition.
  kPlanted,
  kTruth,
  kYes,
  kNo,
};

struct MockProfile {
  MockRule rule = MockRule::kHash;
  double failure_rate = 0;
  uint64_t seed = 0;
  // Every call at this step fails (0 = never).
  int fail_step = 0;
};

absl::StatusOr<MockProfile> ParseMockEndpoint(std::string_view endpoint);

// Deterministic backend. Unconstrained calls answer "step <k>: noted";
// constrained calls answer with the rule's label.
class MockBackend : public CompletionBackend {
 public:
  MockBackend(MockProfile profile, std::pair<std::string, std::string> labels,
              OutputFormat format);
  absl::StatusOr<std::string> Complete(const CompletionRequest& request) override;
  int64_t calls() const override { return calls_; }

  // The label the rule assigns, before formatting.
  int RuleLabel(const CompletionRequest& request) const;

 private:
  MockProfile profile_;
  std::pair<std::string, std::string> labels_;
  OutputFormat format_;
  std::atomic<int64_t> calls_{0};
};

// Wraps a function; handy for scripted upstreams.
class FunctionBackend : public CompletionBackend {
 public:
  using Fn = std::function<absl::StatusOr<std::string>(const CompletionRequest&)>;
  explicit FunctionBackend(Fn fn) : fn_(std::move(fn)) {}
  absl::StatusOr<std::string> Complete(const CompletionRequest& request) override {
    ++calls_;
    return fn_(request);
  }
  int64_t calls() const override { return calls_; }

 private:
  Fn fn_;
  std::atomic<int64_t> calls_{0};
};

// HTTP POST to an OpenAI-compatible endpoint, temperature 0. The request
// body uses chat messages when the path contains "chat/completions".
class HttpBackend : public CompletionBackend {
 public:
  static absl::StatusOr<std::unique_ptr<HttpBackend>> Create(
      const GatewayConfig& config);
  absl::StatusOr<std::string> Complete(const CompletionRequest& request) override;
  int64_t calls() const override { return calls_; }

 private:
  HttpBackend(const GatewayConfig& config, std::string origin, std::string path,
              std::string api_key);

  GatewayConfig config_;
  std::string origin_;
  std::string path_;
  std::string api_key_;
  std::atomic<int64_t> calls_{0};
};

absl::StatusOr<std::unique_ptr<CompletionBackend>> MakeBackend(
    const GatewayConfig& config);

// First whitespace token that equals an allowed label, ignoring case and
// surrounding punctuation: positive -> 1, negative -> 0, none -> nullopt.
std::optional<int> ParseLabel(std::string_view text,
                              const std::pair<std::string, std::string>& labels,
                              OutputFormat format = OutputFormat::kBareLabel);

struct Exchange {
  std::string question;
  std::string answer;
};

struct ClassifyOutcome {
  PredictionRecord record;
  std::vector<Exchange> transcript;
  int calls = 0;
};

struct CallContext {
  const Instance* instance = nullptr;
  CompositionId composition_id;
  uint64_t num_compositions = 0;
  int64_t seed = 0;
};

using SleepFn = std::function<void(std::chrono::milliseconds)>;

class Gateway {
 public:
  // `sleep` defaults to std::this_thread::sleep_for.
  Gateway(GatewayConfig config, CompletionBackend* backend, SleepFn sleep = {});

  const GatewayConfig& config() const { return config_; }

  // Single label-constrained call (plus one corrective retry on a parse
  // failure). Requires an empty reasoning chain.
  absl::StatusOr<ClassifyOutcome> Classify(const RenderedPrompt& prompt,
                                           const CallContext& context) const;

  // Unconstrained call per sub-question, each seeing all prior questions and
  // answers, then a constrained final call. Requires a non-empty chain.
  absl::StatusOr<ClassifyOutcome> ClassifyWithReasoning(
      const RenderedPrompt& prompt, const CallContext& context) const;

  // Dispatches on whether the prompt has a reasoning chain.
  ClassifyOutcome ClassifyAny(const RenderedPrompt& prompt,
                              const CallContext& context) const;

 private:
  absl::StatusOr<std::string> CallWithRetry(CompletionRequest request,
                                            int* calls) const;
  std::string CorrectiveInstruction() const;

  GatewayConfig config_;
  CompletionBackend* backend_;
  SleepFn sleep_;
};

struct CollectJob {
  const CompositionSpace* space = nullptr;
  // Instances to label.
  std::vector<Instance> instances;
  // Demonstration pool (usually the training split).
  std::vector<Instance> demo_pool;
  TemplateSet templates;
  // k and seed; the strategy comes from the demonstrations variant.
  DemonstrationConfig demonstrations;
  int64_t seed = 0;
};

struct CollectResult {
  // Ordered by instance (job order), then composition id.
  std::vector<PredictionRecord> records;
  int64_t upstream_calls = 0;
  int64_t cache_hits = 0;
  int64_t null_count = 0;
  // Error message -> number of pairs.
  std::map<std::string, int64_t> errors;
};

// Labels every (instance, composition) pair with at most max_in_flight
// concurrent requests. Cached pairs are not requested; new records are
// appended to the cache as they complete.
absl::StatusOr<CollectResult> Collect(const CollectJob& job,
                                      const Gateway& gateway,
                                      PredictionCache& cache);

}  // namespace promptcomp

#endif  // PROMPTCOMP_LLM_GATEWAY_H_
