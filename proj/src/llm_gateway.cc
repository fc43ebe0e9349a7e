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

#include "promptcomp/llm_gateway.h"

#include <algorithm>
#include <cctype>
#include <mutex>
#include <thread>

#include "absl/strings/ascii.h"
#include "absl/strings/match.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "promptcomp/hashing.h"
#include "promptcomp/status_macros.h"
#include "promptcomp/synthetic.h"

namespace promptcomp {

absl::Status GatewayConfig::Validate() const {
  const auto& [positive, negative] = allowed_labels;
  if (positive.empty() || negative.empty()) {
    return absl::InvalidArgumentError("allowed_labels must be non-empty");
  }
  for (const std::string* label : {&positive, &negative}) {
    for (const char c : *label) {
      if (absl::ascii_isspace(static_cast<unsigned char>(c))) {
        return absl::InvalidArgumentError(
            absl::StrCat("label '", *label, "' contains whitespace"));
      }
    }
  }
  if (absl::AsciiStrToLower(positive) == absl::AsciiStrToLower(negative)) {
    return absl::InvalidArgumentError("allowed_labels must be distinct");
  }
  if (max_retries < 0) return absl::InvalidArgumentError("max_retries < 0");
  if (backoff_base_ms < 0) {
    return absl::InvalidArgumentError("backoff_base_ms < 0");
  }
  if (timeout_ms <= 0) return absl::InvalidArgumentError("timeout_ms <= 0");
  if (max_in_flight < 1) return absl::InvalidArgumentError("max_in_flight < 1");
  if (label_max_tokens < 1 || reasoning_max_tokens < 1) {
    return absl::InvalidArgumentError("token limits must be positive");
  }
  if (endpoint.empty()) return absl::InvalidArgumentError("endpoint is empty");
  if (model_id.empty()) return absl::InvalidArgumentError("model_id is empty");
  return absl::OkStatus();
}

nlohmann::json GatewayConfig::ToJson() const {
  return {{"endpoint", endpoint},
          {"model_id", model_id},
          {"allowed_labels", {allowed_labels.first, allowed_labels.second}},
          {"output_format",
           output_format == OutputFormat::kJson ? "json" : "bare"},
          {"max_retries", max_retries},
          {"backoff_base_ms", backoff_base_ms},
          {"timeout_ms", timeout_ms},
          {"max_in_flight", max_in_flight},
          {"label_max_tokens", label_max_tokens},
          {"reasoning_max_tokens", reasoning_max_tokens},
          {"api_key_env", api_key_env}};
}

absl::StatusOr<GatewayConfig> GatewayConfig::FromJson(const nlohmann::json& json) {
  if (!json.is_object()) {
    return absl::InvalidArgumentError("gateway config must be an object");
  }
  GatewayConfig config;
  auto read_string = [&](const std::string& key, std::string& out) -> absl::Status {
    if (!json.contains(key)) return absl::OkStatus();
    if (!json[key].is_string()) {
      return absl::InvalidArgumentError(absl::StrCat(key, " must be a string"));
    }
    out = json[key].get<std::string>();
    return absl::OkStatus();
  };
  auto read_int = [&](const std::string& key, int& out) -> absl::Status {
    if (!json.contains(key)) return absl::OkStatus();
    if (!json[key].is_number_integer()) {
      return absl::InvalidArgumentError(absl::StrCat(key, " must be an integer"));
    }
    out = json[key].get<int>();
    return absl::OkStatus();
  };
  for (const auto& [key, value] : json.items()) {
    static const char* kKnown[] = {
        "endpoint",    "model_id",         "allowed_labels",
        "output_format", "max_retries",    "backoff_base_ms",
        "timeout_ms",  "max_in_flight",    "label_max_tokens",
        "reasoning_max_tokens", "api_key_env"};
    if (std::find_if(std::begin(kKnown), std::end(kKnown), [&](const char* k) {
          return key == k;
        }) == std::end(kKnown)) {
      return absl::InvalidArgumentError(absl::StrCat("unknown key '", key, "'"));
    }
  }
  RETURN_IF_ERROR(read_string("endpoint", config.endpoint));
  RETURN_IF_ERROR(read_string("model_id", config.model_id));
  RETURN_IF_ERROR(read_string("api_key_env", config.api_key_env));
  RETURN_IF_ERROR(read_int("max_retries", config.max_retries));
  RETURN_IF_ERROR(read_int("backoff_base_ms", config.backoff_base_ms));
  RETURN_IF_ERROR(read_int("timeout_ms", config.timeout_ms));
  RETURN_IF_ERROR(read_int("max_in_flight", config.max_in_flight));
  RETURN_IF_ERROR(read_int("label_max_tokens", config.label_max_tokens));
  RETURN_IF_ERROR(read_int("reasoning_max_tokens", config.reasoning_max_tokens));
  if (json.contains("allowed_labels")) {
    const nlohmann::json& labels = json["allowed_labels"];
    if (!labels.is_array() || labels.size() != 2 || !labels[0].is_string() ||
        !labels[1].is_string()) {
      return absl::InvalidArgumentError(
          "allowed_labels must be [positive, negative] strings");
    }
    config.allowed_labels = {labels[0].get<std::string>(),
                             labels[1].get<std::string>()};
  }
  std::string format = "bare";
  RETURN_IF_ERROR(read_string("output_format", format));
  if (format == "bare") {
    config.output_format = OutputFormat::kBareLabel;
  } else if (format == "json") {
    config.output_format = OutputFormat::kJson;
  } else {
    return absl::InvalidArgumentError(
        absl::StrCat("output_format must be 'bare' or 'json', got '", format, "'"));
  }
  RETURN_IF_ERROR(config.Validate());
  return config;
}

absl::StatusOr<MockProfile> ParseMockEndpoint(std::string_view endpoint) {
  if (!absl::StartsWith(std::string(endpoint), "mock:")) {
    return absl::InvalidArgumentError("mock endpoints start with 'mock:'");
  }
  endpoint.remove_prefix(5);
  MockProfile profile;
  std::string_view rule = endpoint;
  std::string_view query;
  if (const size_t q = endpoint.find('?'); q != std::string_view::npos) {
    rule = endpoint.substr(0, q);
    query = endpoint.substr(q + 1);
  }
  if (rule.empty() || rule == "hash") {
    profile.rule = MockRule::kHash;
  } else if (rule == "planted") {
    profile.rule = MockRule::kPlanted;
  } else if (rule == "truth") {
    profile.rule = MockRule::kTruth;
  } else if (rule == "yes") {
    profile.rule = MockRule::kYes;
  } else if (rule == "no") {
    profile.rule = MockRule::kNo;
  } else {
    return absl::InvalidArgumentError(absl::StrCat("unknown mock rule '", std::string(rule), "'"));
  }
  const std::string query_string(query);
  for (absl::string_view pair :
       absl::StrSplit(query_string, '&', absl::SkipEmpty())) {
    std::pair<absl::string_view, absl::string_view> kv =
        absl::StrSplit(pair, absl::MaxSplits('=', 1));
    bool ok = false;
    if (kv.first == "fail") {
      ok = absl::SimpleAtod(kv.second, &profile.failure_rate) &&
           profile.failure_rate >= 0 && profile.failure_rate <= 1;
    } else if (kv.first == "seed") {
      ok = absl::SimpleAtoi(kv.second, &profile.seed);
    } else if (kv.first == "fail_step") {
      ok = absl::SimpleAtoi(kv.second, &profile.fail_step) &&
           profile.fail_step >= 0;
    }
    if (!ok) {
      return absl::InvalidArgumentError(
          absl::StrCat("bad mock parameter '", pair, "'"));
    }
  }
  return profile;
}

MockBackend::MockBackend(MockProfile profile,
                         std::pair<std::string, std::string> labels,
                         OutputFormat format)
    : profile_(profile), labels_(std::move(labels)), format_(format) {}

int MockBackend::RuleLabel(const CompletionRequest& request) const {
  const int truth = request.instance ? request.instance->label : 0;
  const std::string_view id = request.instance ? request.instance->id : "";
  switch (profile_.rule) {
    case MockRule::kYes:
      return 1;
    case MockRule::kNo:
      return 0;
    case MockRule::kTruth:
      return truth;
    case MockRule::kPlanted: {
      const uint64_t planted =
          request.num_compositions == 0
              ? 0
              : PlantedComposition(id, request.num_compositions);
      return planted == request.composition_id.value ? truth : 1 - truth;
    }
    case MockRule::kHash:
      break;
  }
  return static_cast<int>(
      Mix64(Fnv1a64(id) ^ Mix64(request.composition_id.value) ^
            Mix64(profile_.seed + 0x51ed))
      >> 63);
}

absl::StatusOr<std::string> MockBackend::Complete(const CompletionRequest& request) {
  ++calls_;
  if (profile_.fail_step > 0 && request.step == profile_.fail_step) {
    return absl::UnavailableError(
        absl::StrCat("injected failure at step ", request.step));
  }
  if (profile_.failure_rate > 0) {
    const std::string_view id = request.instance ? request.instance->id : "";
    const uint64_t h =
        Mix64(Fnv1a64(id) ^ Mix64(request.composition_id.value * 1000003 +
                                  static_cast<uint64_t>(request.step) * 131 +
                                  static_cast<uint64_t>(request.attempt)) ^
              Mix64(profile_.seed));
    if ((h >> 11) * 0x1.0p-53 < profile_.failure_rate) {
      return absl::UnavailableError("injected failure");
    }
  }
  if (!request.constrained) return absl::StrCat("step ", request.step, ": noted");
  const std::string& label =
      RuleLabel(request) == 1 ? labels_.first : labels_.second;
  if (format_ == OutputFormat::kJson) {
    return nlohmann::json{{"isBiased", label}}.dump();
  }
  return label;
}

absl::StatusOr<std::unique_ptr<CompletionBackend>> MakeBackend(
    const GatewayConfig& config) {
  if (absl::StartsWith(config.endpoint, "mock:")) {
    ASSIGN_OR_RETURN(const MockProfile profile,
                     ParseMockEndpoint(config.endpoint));
    return std::make_unique<MockBackend>(profile, config.allowed_labels,
                                         config.output_format);
  }
  if (absl::StartsWith(config.endpoint, "http://") ||
      absl::StartsWith(config.endpoint, "https://")) {
    ASSIGN_OR_RETURN(std::unique_ptr<HttpBackend> backend,
                     HttpBackend::Create(config));
    return std::unique_ptr<CompletionBackend>(std::move(backend));
  }
  return absl::InvalidArgumentError(absl::StrCat(
      "endpoint must start with mock:, http:// or https://, got '",
      config.endpoint, "'"));
}

namespace {

std::optional<int> ParseBare(std::string_view text,
                             const std::pair<std::string, std::string>& labels) {
  const std::string owned(text);
  for (absl::string_view token : absl::StrSplit(
           owned, absl::ByAnyChar(" \t\r\n\f\v"), absl::SkipEmpty())) {
    while (!token.empty() && std::ispunct(static_cast<unsigned char>(token.front()))) {
      token.remove_prefix(1);
    }
    while (!token.empty() && std::ispunct(static_cast<unsigned char>(token.back()))) {
      token.remove_suffix(1);
    }
    if (absl::EqualsIgnoreCase(token, labels.first)) return 1;
    if (absl::EqualsIgnoreCase(token, labels.second)) return 0;
  }
  return std::nullopt;
}

}  // namespace

std::optional<int> ParseLabel(std::string_view text,
                              const std::pair<std::string, std::string>& labels,
                              OutputFormat format) {
  if (format == OutputFormat::kJson) {
    const size_t open = text.find('{');
    const size_t close = text.rfind('}');
    if (open != std::string_view::npos && close != std::string_view::npos &&
        open < close) {
      const nlohmann::json json = nlohmann::json::parse(
          text.substr(open, close - open + 1), nullptr, /*allow_exceptions=*/false);
      if (json.is_object() && json.contains("isBiased")) {
        const nlohmann::json& value = json["isBiased"];
        if (value.is_boolean()) return value.get<bool>() ? 1 : 0;
        if (value.is_string()) return ParseBare(value.get<std::string>(), labels);
        return std::nullopt;
      }
    }
  }
  return ParseBare(text, labels);
}

Gateway::Gateway(GatewayConfig config, CompletionBackend* backend, SleepFn sleep)
    : config_(std::move(config)), backend_(backend), sleep_(std::move(sleep)) {
  if (!sleep_) {
    sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

std::string Gateway::CorrectiveInstruction() const {
  return absl::StrCat("\n\nAnswer only with \"", config_.allowed_labels.first,
                      "\" or \"", config_.allowed_labels.second, "\".");
}

namespace {

CompletionRequest BaseRequest(const CallContext& context) {
  CompletionRequest request;
  request.instance = context.instance;
  request.composition_id = context.composition_id;
  request.num_compositions = context.num_compositions;
  return request;
}

PredictionRecord BaseRecord(const CallContext& context,
                            const GatewayConfig& config) {
  PredictionRecord record;
  record.instance_id = context.instance ? context.instance->id : "";
  record.composition_id = context.composition_id;
  record.model_id = config.model_id;
  record.seed = context.seed;
  return record;
}

std::string RenderTranscript(const std::vector<Exchange>& transcript) {
  std::string out;
  for (const Exchange& e : transcript) {
    if (!out.empty()) out += "\n\n";
    absl::StrAppend(&out, "Q: ", e.question, "\nA: ", e.answer);
  }
  return out;
}

}  // namespace

absl::StatusOr<std::string> Gateway::CallWithRetry(CompletionRequest request,
                                                   int* calls) const {
  absl::Status last;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    request.attempt = attempt;
    ++*calls;
    absl::StatusOr<std::string> response = backend_->Complete(request);
    if (response.ok()) return response;
    last = response.status();
    if (attempt < config_.max_retries) {
      sleep_(std::chrono::milliseconds(
          static_cast<int64_t>(config_.backoff_base_ms) << attempt));
    }
  }
  return last;
}

namespace {

// Sends a constrained request with one corrective retry; fills the label,
// raw output and error of `outcome.record`.
void ConstrainedCall(const GatewayConfig& config,
                     const std::function<absl::StatusOr<std::string>(
                         const CompletionRequest&, int*)>& call,
                     CompletionRequest request, const std::string& corrective,
                     ClassifyOutcome& outcome) {
  request.constrained = true;
  request.max_tokens = config.label_max_tokens;
  for (int parse_attempt = 0; parse_attempt < 2; ++parse_attempt) {
    if (parse_attempt == 1) request.prompt += corrective;
    absl::StatusOr<std::string> raw = call(request, &outcome.calls);
    if (!raw.ok()) {
      outcome.record.error =
          absl::StrCat("transport at step ", request.step, ": ",
                       raw.status().message());
      return;
    }
    outcome.record.raw_output = *raw;
    outcome.record.predicted_label =
        ParseLabel(*raw, config.allowed_labels, config.output_format);
    if (outcome.record.predicted_label) {
      outcome.record.error.clear();
      return;
    }
    outcome.record.error = "parse_failure";
  }
}

}  // namespace

absl::StatusOr<ClassifyOutcome> Gateway::Classify(const RenderedPrompt& prompt,
                                                  const CallContext& context) const {
  if (!prompt.reasoning_chain.empty()) {
    return absl::FailedPreconditionError(
        "prompt has a reasoning chain; use ClassifyWithReasoning");
  }
  ClassifyOutcome outcome;
  outcome.record = BaseRecord(context, config_);
  CompletionRequest request = BaseRequest(context);
  request.prompt = prompt.full_text;
  request.step = 1;
  ConstrainedCall(
      config_,
      [this](const CompletionRequest& r, int* calls) {
        return CallWithRetry(r, calls);
      },
      std::move(request), CorrectiveInstruction(), outcome);
  return outcome;
}

absl::StatusOr<ClassifyOutcome> Gateway::ClassifyWithReasoning(
    const RenderedPrompt& prompt, const CallContext& context) const {
  if (prompt.reasoning_chain.empty()) {
    return absl::FailedPreconditionError("prompt has no reasoning chain");
  }
  ClassifyOutcome outcome;
  outcome.record = BaseRecord(context, config_);
  auto call = [this](const CompletionRequest& r, int* calls) {
    return CallWithRetry(r, calls);
  };
  std::string conversation = prompt.full_text;
  const size_t questions = prompt.reasoning_chain.size() - 1;
  for (size_t k = 0; k < questions; ++k) {
    const std::string& question = prompt.reasoning_chain[k];
    CompletionRequest request = BaseRequest(context);
    request.prompt = absl::StrCat(conversation, "\n\n", question);
    request.max_tokens = config_.reasoning_max_tokens;
    request.step = static_cast<int>(k) + 1;
    absl::StatusOr<std::string> answer = call(request, &outcome.calls);
    if (!answer.ok()) {
      outcome.record.error = absl::StrCat("transport at step ", request.step,
                                          ": ", answer.status().message());
      outcome.record.raw_output = RenderTranscript(outcome.transcript);
      return outcome;
    }
    outcome.transcript.push_back({question, *answer});
    conversation = absl::StrCat(request.prompt, "\n", *answer);
  }
  const std::string& final_question = prompt.reasoning_chain.back();
  CompletionRequest request = BaseRequest(context);
  request.prompt = absl::StrCat(conversation, "\n\n", final_question);
  request.step = static_cast<int>(questions) + 1;
  ConstrainedCall(config_, call, std::move(request), CorrectiveInstruction(),
                  outcome);
  if (outcome.record.error.rfind("transport", 0) != 0) {
    outcome.transcript.push_back({final_question, outcome.record.raw_output});
  }
  outcome.record.raw_output = RenderTranscript(outcome.transcript);
  return outcome;
}

ClassifyOutcome Gateway::ClassifyAny(const RenderedPrompt& prompt,
                                     const CallContext& context) const {
  absl::StatusOr<ClassifyOutcome> outcome =
      prompt.reasoning_chain.empty() ? Classify(prompt, context)
                                     : ClassifyWithReasoning(prompt, context);
  // Both preconditions are met by construction here.
  return *std::move(outcome);
}

absl::StatusOr<CollectResult> Collect(const CollectJob& job,
                                      const Gateway& gateway,
                                      PredictionCache& cache) {
  if (job.space == nullptr) return absl::InvalidArgumentError("no space");
  const CompositionSpace& space = *job.space;
  ASSIGN_OR_RETURN(const std::vector<Composition> compositions, space.Enumerate());
  const size_t num_c = compositions.size();
  const std::string& model_id = gateway.config().model_id;
  const std::optional<int> demo_index = space.IndexOf(kDemonstrations);

  CollectResult result;
  result.records.resize(job.instances.size() * num_c);
  std::vector<size_t> pending;
  for (size_t row = 0; row < job.instances.size(); ++row) {
    for (size_t c = 0; c < num_c; ++c) {
      const CacheKey key{model_id, c, job.instances[row].id, job.seed};
      if (std::optional<PredictionRecord> hit = cache.Get(key)) {
        result.records[row * num_c + c] = *std::move(hit);
        ++result.cache_hits;
      } else {
        pending.push_back(row * num_c + c);
      }
    }
  }

  std::mutex mu;
  std::map<std::pair<size_t, int>, std::vector<Instance>> demo_memo;
  absl::Status first_error;
  auto demos_for = [&](size_t row,
                       const Composition& comp) -> absl::StatusOr<std::vector<Instance>> {
    if (!demo_index || !comp.Has(*demo_index)) return std::vector<Instance>{};
    DemonstrationConfig config = job.demonstrations;
    const Technique& tech = space.technique(*demo_index);
    if (tech.kind == TechniqueKind::kVariantGroup) {
      ASSIGN_OR_RETURN(config.strategy,
                       ParseDemoStrategy(tech.variants[*comp.Variant(*demo_index)]));
    }
    const std::pair<size_t, int> memo_key{row, static_cast<int>(config.strategy)};
    {
      std::lock_guard<std::mutex> lock(mu);
      if (auto it = demo_memo.find(memo_key); it != demo_memo.end()) {
        return it->second;
      }
    }
    const Instance& instance = job.instances[row];
    std::vector<Instance> pool;
    pool.reserve(job.demo_pool.size());
    for (const Instance& candidate : job.demo_pool) {
      if (candidate.id != instance.id) pool.push_back(candidate);
    }
    ASSIGN_OR_RETURN(std::vector<Instance> demos,
                     SelectDemonstrations(config, instance, pool));
    std::lock_guard<std::mutex> lock(mu);
    demo_memo.emplace(memo_key, demos);
    return demos;
  };

  auto run_one = [&](size_t slot) -> absl::Status {
    const size_t row = slot / num_c;
    const size_t c = slot % num_c;
    const Instance& instance = job.instances[row];
    ASSIGN_OR_RETURN(const std::vector<Instance> demos,
                     demos_for(row, compositions[c]));
    ASSIGN_OR_RETURN(
        const RenderedPrompt prompt,
        Render(space, compositions[c], instance, job.templates, demos));
    CallContext context{&instance, CompositionId{c}, num_c, job.seed};
    ClassifyOutcome outcome = gateway.ClassifyAny(prompt, context);
    ScoreRecord(outcome.record, instance.label);
    // Transport failures are not cached so that a rerun retries them.
    if (outcome.record.error.rfind("transport", 0) != 0) {
      RETURN_IF_ERROR(cache.Put(outcome.record));
    }
    std::lock_guard<std::mutex> lock(mu);
    result.upstream_calls += outcome.calls;
    result.records[slot] = std::move(outcome.record);
    return absl::OkStatus();
  };

  std::atomic<size_t> next{0};
  std::atomic<bool> stop{false};
  auto worker = [&] {
    while (!stop) {
      const size_t i = next++;
      if (i >= pending.size()) return;
      absl::Status status = run_one(pending[i]);
      if (!status.ok()) {
        std::lock_guard<std::mutex> lock(mu);
        if (first_error.ok()) first_error = status;
        stop = true;
      }
    }
  };
  const int threads = static_cast<int>(std::min<size_t>(
      static_cast<size_t>(gateway.config().max_in_flight), pending.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  if (threads > 0) worker();
  for (std::thread& t : pool) t.join();
  RETURN_IF_ERROR(first_error);

  for (const PredictionRecord& record : result.records) {
    if (!record.predicted_label) {
      ++result.null_count;
      ++result.errors[record.error.empty() ? "null label" : record.error];
    }
  }
  return result;
}

}  // namespace promptcomp
