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

#include <chrono>
#include <mutex>
#include <thread>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "httplib.h"
#include "promptcomp/synthetic.h"

namespace promptcomp {
namespace {

using ::testing::ElementsAre;
using ::testing::HasSubstr;
using ::testing::Optional;

const std::pair<std::string, std::string> kLabels = {"Yes", "No"};

Instance Make(std::string id, int label) {
  Instance instance;
  instance.id = std::move(id);
  instance.text = "text " + instance.id;
  instance.label = label;
  instance.split = Split::kTest;
  return instance;
}

RenderedPrompt Prompt(std::vector<std::string> chain = {}) {
  RenderedPrompt prompt;
  prompt.full_text = "PROMPT";
  prompt.reasoning_chain = std::move(chain);
  return prompt;
}

// Records requested sleeps instead of sleeping.
struct SleepLog {
  std::mutex mu;
  std::vector<int64_t> ms;
  SleepFn Fn() {
    return [this](std::chrono::milliseconds d) {
      std::lock_guard<std::mutex> lock(mu);
      ms.push_back(d.count());
    };
  }
};

TEST(ParseLabelTest, FixtureSuite) {
  EXPECT_THAT(ParseLabel("Yes", kLabels), Optional(1));
  EXPECT_THAT(ParseLabel("yes,", kLabels), Optional(1));
  EXPECT_THAT(ParseLabel("NO", kLabels), Optional(0));
  EXPECT_THAT(ParseLabel("no.", kLabels), Optional(0));
  EXPECT_EQ(ParseLabel("maybe", kLabels), std::nullopt);
  EXPECT_EQ(ParseLabel("", kLabels), std::nullopt);
  EXPECT_THAT(ParseLabel("  \"No\" because", kLabels), Optional(0));
  EXPECT_EQ(ParseLabel("Yesterday", kLabels), std::nullopt);
}

TEST(ParseLabelTest, JsonFormat) {
  EXPECT_THAT(ParseLabel("{\"isBiased\": \"yes\"}", kLabels, OutputFormat::kJson),
              Optional(1));
  EXPECT_THAT(ParseLabel("{\"isBiased\":\"No\"}", kLabels, OutputFormat::kJson),
              Optional(0));
  EXPECT_THAT(ParseLabel("No", kLabels, OutputFormat::kJson), Optional(0));
  EXPECT_EQ(ParseLabel("{\"isBiased\":\"unsure\"}", kLabels, OutputFormat::kJson),
            std::nullopt);
}

TEST(GatewayConfigTest, Validation) {
  GatewayConfig config;
  EXPECT_TRUE(config.Validate().ok());
  config.allowed_labels = {"yes", "YES"};
  EXPECT_FALSE(config.Validate().ok());
  config = {};
  config.max_retries = -1;
  EXPECT_FALSE(config.Validate().ok());
  config = {};
  config.allowed_labels = {"", "No"};
  EXPECT_FALSE(config.Validate().ok());
}

TEST(GatewayConfigTest, JsonRoundTripAndUnknownKeys) {
  GatewayConfig config;
  config.model_id = "m1";
  config.output_format = OutputFormat::kJson;
  const auto back = GatewayConfig::FromJson(config.ToJson());
  ASSERT_TRUE(back.ok());
  EXPECT_EQ(back->model_id, "m1");
  EXPECT_EQ(back->output_format, OutputFormat::kJson);
  EXPECT_FALSE(GatewayConfig::FromJson({{"retries", 3}}).ok());
}

TEST(MockTest, EndpointParsing) {
  const auto profile = ParseMockEndpoint("mock:planted?fail=0.25&seed=9&fail_step=2");
  ASSERT_TRUE(profile.ok());
  EXPECT_EQ(profile->rule, MockRule::kPlanted);
  EXPECT_DOUBLE_EQ(profile->failure_rate, 0.25);
  EXPECT_EQ(profile->seed, 9u);
  EXPECT_EQ(profile->fail_step, 2);
  EXPECT_EQ(ParseMockEndpoint("mock:")->rule, MockRule::kHash);
  EXPECT_FALSE(ParseMockEndpoint("mock:psychic").ok());
  EXPECT_FALSE(ParseMockEndpoint("mock:yes?fail=2").ok());
}

TEST(MockTest, PlantedRule) {
  MockBackend mock({MockRule::kPlanted}, kLabels, OutputFormat::kBareLabel);
  const Instance instance = Make("abc", 1);
  const uint64_t planted = PlantedComposition(instance.id, 8);
  for (uint64_t c = 0; c < 8; ++c) {
    CompletionRequest request;
    request.instance = &instance;
    request.composition_id = CompositionId{c};
    request.num_compositions = 8;
    request.constrained = true;
    EXPECT_EQ(mock.RuleLabel(request), c == planted ? 1 : 0);
  }
}

TEST(MockTest, HashRuleIsPure) {
  MockBackend a({MockRule::kHash, 0, 3}, kLabels, OutputFormat::kBareLabel);
  MockBackend b({MockRule::kHash, 0, 3}, kLabels, OutputFormat::kBareLabel);
  const Instance instance = Make("i", 0);
  CompletionRequest request;
  request.instance = &instance;
  request.constrained = true;
  for (uint64_t c = 0; c < 16; ++c) {
    request.composition_id = CompositionId{c};
    EXPECT_EQ(*a.Complete(request), *b.Complete(request));
  }
}

TEST(ClassifyTest, YesMapsToOne) {
  FunctionBackend backend([](const CompletionRequest& r) -> absl::StatusOr<std::string> {
    EXPECT_TRUE(r.constrained);
    EXPECT_EQ(r.max_tokens, 3);
    EXPECT_EQ(r.prompt, "PROMPT");
    return "Yes";
  });
  Gateway gateway({}, &backend, [](auto) {});
  const ClassifyOutcome out = gateway.Classify(Prompt(), {}).value();
  EXPECT_THAT(out.record.predicted_label, Optional(1));
  EXPECT_EQ(out.calls, 1);
  EXPECT_TRUE(out.record.error.empty());
}

TEST(ClassifyTest, CorrectiveRetryThenGiveUp) {
  std::vector<std::string> prompts;
  FunctionBackend backend([&](const CompletionRequest& r) -> absl::StatusOr<std::string> {
    prompts.push_back(r.prompt);
    return "maybe";
  });
  Gateway gateway({}, &backend, [](auto) {});
  const ClassifyOutcome out = gateway.Classify(Prompt(), {}).value();
  EXPECT_EQ(out.record.predicted_label, std::nullopt);
  EXPECT_EQ(out.record.error, "parse_failure");
  EXPECT_EQ(out.record.raw_output, "maybe");
  ASSERT_EQ(prompts.size(), 2u);
  EXPECT_EQ(prompts[0], "PROMPT");
  EXPECT_THAT(prompts[1], HasSubstr("PROMPT"));
  EXPECT_THAT(prompts[1], HasSubstr("Yes"));
  EXPECT_GT(prompts[1].size(), prompts[0].size());
}

TEST(ClassifyTest, CorrectiveRetryCanSucceed) {
  int n = 0;
  FunctionBackend backend([&](const CompletionRequest&) -> absl::StatusOr<std::string> {
    return ++n == 1 ? "hmm" : "no.";
  });
  Gateway gateway({}, &backend, [](auto) {});
  const ClassifyOutcome out = gateway.Classify(Prompt(), {}).value();
  EXPECT_THAT(out.record.predicted_label, Optional(0));
  EXPECT_EQ(out.calls, 2);
}

TEST(ClassifyTest, TransportFailureBacksOffExponentially) {
  FunctionBackend backend([](const CompletionRequest&) -> absl::StatusOr<std::string> {
    return absl::UnavailableError("503");
  });
  GatewayConfig config;
  config.max_retries = 3;
  config.backoff_base_ms = 100;
  SleepLog sleeps;
  Gateway gateway(config, &backend, sleeps.Fn());
  const ClassifyOutcome out = gateway.Classify(Prompt(), {}).value();
  EXPECT_EQ(out.record.predicted_label, std::nullopt);
  EXPECT_THAT(out.record.error, HasSubstr("transport at step 1"));
  EXPECT_THAT(out.record.error, HasSubstr("503"));
  EXPECT_EQ(out.calls, 4);
  EXPECT_THAT(sleeps.ms, ElementsAre(100, 200, 400));
}

TEST(ClassifyTest, TransientFailureRecovers) {
  int n = 0;
  FunctionBackend backend([&](const CompletionRequest&) -> absl::StatusOr<std::string> {
    if (++n < 3) return absl::UnavailableError("flaky");
    return "Yes";
  });
  SleepLog sleeps;
  Gateway gateway({}, &backend, sleeps.Fn());
  const ClassifyOutcome out = gateway.Classify(Prompt(), {}).value();
  EXPECT_THAT(out.record.predicted_label, Optional(1));
  EXPECT_THAT(sleeps.ms, ElementsAre(200, 400));
}

TEST(ClassifyTest, ChainRequiresReasoningEntryPoint) {
  FunctionBackend backend([](const CompletionRequest&) { return std::string("Yes"); });
  Gateway gateway({}, &backend, [](auto) {});
  EXPECT_FALSE(gateway.Classify(Prompt({"Q", "F"}), {}).ok());
  EXPECT_FALSE(gateway.ClassifyWithReasoning(Prompt(), {}).ok());
}

TEST(ReasoningTest, StepsInOrderWithGrowingContext) {
  std::vector<CompletionRequest> seen;
  FunctionBackend backend([&](const CompletionRequest& r) -> absl::StatusOr<std::string> {
    seen.push_back(r);
    if (r.constrained) return std::string("No");
    return "answer " + std::to_string(r.step);
  });
  Gateway gateway({}, &backend, [](auto) {});
  const ClassifyOutcome out =
      gateway.ClassifyWithReasoning(Prompt({"Q1", "Q2", "FINAL"}), {}).value();
  ASSERT_EQ(seen.size(), 3u);
  EXPECT_EQ(seen[0].prompt, "PROMPT\n\nQ1");
  EXPECT_EQ(seen[1].prompt, "PROMPT\n\nQ1\nanswer 1\n\nQ2");
  EXPECT_EQ(seen[2].prompt, "PROMPT\n\nQ1\nanswer 1\n\nQ2\nanswer 2\n\nFINAL");
  EXPECT_FALSE(seen[0].constrained);
  EXPECT_EQ(seen[0].max_tokens, 256);
  EXPECT_TRUE(seen[2].constrained);
  EXPECT_THAT(out.record.predicted_label, Optional(0));
  ASSERT_EQ(out.transcript.size(), 3u);
  EXPECT_EQ(out.transcript[1].answer, "answer 2");
  const size_t first = out.record.raw_output.find("answer 1");
  const size_t second = out.record.raw_output.find("answer 2");
  ASSERT_NE(first, std::string::npos);
  ASSERT_NE(second, std::string::npos);
  EXPECT_LT(first, second);
}

TEST(ReasoningTest, MockEchoesStepIndex) {
  MockBackend mock({MockRule::kNo}, kLabels, OutputFormat::kBareLabel);
  Gateway gateway({}, &mock, [](auto) {});
  const Instance instance = Make("i", 1);
  const ClassifyOutcome out =
      gateway.ClassifyWithReasoning(Prompt({"Q1", "Q2", "F"}), {&instance}).value();
  EXPECT_THAT(out.record.predicted_label, Optional(0));
  EXPECT_THAT(out.record.raw_output, HasSubstr("step 1: noted"));
  EXPECT_THAT(out.record.raw_output, HasSubstr("step 2: noted"));
  EXPECT_EQ(mock.calls(), 3);
}

TEST(ReasoningTest, FailureAtStepTwoKeepsPartialTranscript) {
  MockBackend mock({MockRule::kYes, 0, 0, 2}, kLabels, OutputFormat::kBareLabel);
  GatewayConfig config;
  config.max_retries = 1;
  Gateway gateway(config, &mock, [](auto) {});
  const Instance instance = Make("i", 1);
  const ClassifyOutcome out =
      gateway.ClassifyWithReasoning(Prompt({"Q1", "Q2", "F"}), {&instance}).value();
  EXPECT_EQ(out.record.predicted_label, std::nullopt);
  EXPECT_EQ(out.transcript.size(), 1u);
  EXPECT_THAT(out.record.error, HasSubstr("step 2"));
  EXPECT_THAT(out.record.raw_output, HasSubstr("step 1: noted"));
  EXPECT_EQ(out.calls, 3);  // step 1, then step 2 twice
}

class CollectTest : public ::testing::Test {
 protected:
  void SetUp() override {
    job_.space = &space_;
    job_.instances = {Make("a", 1), Make("b", 0), Make("c", 1)};
    job_.templates.task_description = "TASK";
    job_.templates.output_instruction = "OUT";
    job_.templates.persona = "P";
    job_.templates.definition = "D";
  }
  CompositionSpace space_ =
      CompositionSpace::Create({{"persona", {}}, {"definition", {}}}).value();
  CollectJob job_;
};

TEST_F(CollectTest, ColdThenWarm) {
  GatewayConfig config;
  config.endpoint = "mock:truth";
  MockBackend mock({MockRule::kTruth}, kLabels, OutputFormat::kBareLabel);
  Gateway gateway(config, &mock, [](auto) {});
  PredictionCache cache;
  const CollectResult cold = Collect(job_, gateway, cache).value();
  EXPECT_EQ(cold.records.size(), 12u);
  EXPECT_EQ(cold.upstream_calls, 12);
  EXPECT_EQ(mock.calls(), 12);
  EXPECT_EQ(cold.null_count, 0);
  for (size_t k = 0; k < cold.records.size(); ++k) {
    EXPECT_EQ(cold.records[k].instance_id, job_.instances[k / 4].id);
    EXPECT_EQ(cold.records[k].composition_id.value, k % 4);
    EXPECT_EQ(cold.records[k].correct, true);
  }
  const CollectResult warm = Collect(job_, gateway, cache).value();
  EXPECT_EQ(warm.records, cold.records);
  EXPECT_EQ(warm.upstream_calls, 0);
  EXPECT_EQ(warm.cache_hits, 12);
  EXPECT_EQ(mock.calls(), 12);
}

TEST_F(CollectTest, ConcurrencyDoesNotChangeRecords) {
  MockBackend mock({MockRule::kHash, 0, 5}, kLabels, OutputFormat::kBareLabel);
  GatewayConfig serial;
  serial.max_in_flight = 1;
  GatewayConfig parallel;
  parallel.max_in_flight = 6;
  PredictionCache c1, c2;
  const auto a = Collect(job_, Gateway(serial, &mock, [](auto) {}), c1).value();
  const auto b = Collect(job_, Gateway(parallel, &mock, [](auto) {}), c2).value();
  EXPECT_EQ(a.records, b.records);
}

TEST_F(CollectTest, InFlightLimitIsRespected) {
  std::atomic<int> in_flight{0}, peak{0};
  FunctionBackend backend([&](const CompletionRequest&) -> absl::StatusOr<std::string> {
    const int now = ++in_flight;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    --in_flight;
    return std::string("Yes");
  });
  GatewayConfig config;
  config.max_in_flight = 2;
  PredictionCache cache;
  ASSERT_TRUE(Collect(job_, Gateway(config, &backend, [](auto) {}), cache).ok());
  EXPECT_LE(peak.load(), 2);
}

TEST_F(CollectTest, TransportFailuresAreNotCached) {
  MockBackend failing({MockRule::kTruth, 1.0, 0}, kLabels, OutputFormat::kBareLabel);
  GatewayConfig config;
  config.max_retries = 0;
  PredictionCache cache;
  const CollectResult result =
      Collect(job_, Gateway(config, &failing, [](auto) {}), cache).value();
  EXPECT_EQ(result.null_count, 12);
  EXPECT_EQ(cache.size(), 0u);
  ASSERT_EQ(result.errors.size(), 1u);
  EXPECT_THAT(result.errors.begin()->first, HasSubstr("transport"));
}

TEST_F(CollectTest, DemonstrationsNeedAPool) {
  const CompositionSpace space =
      CompositionSpace::Create({{"demonstrations", {"random"}}}).value();
  job_.space = &space;
  job_.templates.demonstration_format = "{input} -> {output}";
  job_.demonstrations.k = 1;
  MockBackend mock({MockRule::kYes}, kLabels, OutputFormat::kBareLabel);
  PredictionCache cache;
  EXPECT_FALSE(Collect(job_, Gateway({}, &mock, [](auto) {}), cache).ok());
  job_.demo_pool = {Make("p1", 1), Make("p2", 0)};
  const auto ok = Collect(job_, Gateway({}, &mock, [](auto) {}), cache);
  ASSERT_TRUE(ok.ok()) << ok.status();
  EXPECT_EQ(ok->records.size(), 6u);
}

TEST(HttpBackendTest, ChatCompletionsRoundTrip) {
  httplib::Server server;
  std::string seen_body, seen_auth;
  server.Post("/v1/chat/completions",
              [&](const httplib::Request& req, httplib::Response& res) {
                seen_body = req.body;
                seen_auth = req.get_header_value("Authorization");
                res.set_content(
                    R"({"choices":[{"message":{"role":"assistant","content":"No"}}]})",
                    "application/json");
              });
  server.Post("/v1/broken", [](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  setenv("PROMPTCOMP_TEST_KEY", "sekret", 1);
  GatewayConfig config;
  config.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  config.model_id = "test-model";
  config.api_key_env = "PROMPTCOMP_TEST_KEY";
  config.timeout_ms = 2000;
  auto backend = MakeBackend(config);
  ASSERT_TRUE(backend.ok()) << backend.status();
  Gateway gateway(config, backend->get(), [](auto) {});
  const ClassifyOutcome out = gateway.Classify(Prompt(), {}).value();
  EXPECT_THAT(out.record.predicted_label, Optional(0));
  const nlohmann::json body = nlohmann::json::parse(seen_body);
  EXPECT_EQ(body["model"], "test-model");
  EXPECT_EQ(body["temperature"], 0);
  EXPECT_EQ(body["max_tokens"], 3);
  EXPECT_EQ(body["messages"][0]["content"], "PROMPT");
  EXPECT_EQ(seen_auth, "Bearer sekret");

  config.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/broken";
  config.max_retries = 1;
  auto broken = MakeBackend(config);
  ASSERT_TRUE(broken.ok());
  const ClassifyOutcome failed =
      Gateway(config, broken->get(), [](auto) {}).Classify(Prompt(), {}).value();
  EXPECT_THAT(failed.record.error, HasSubstr("transport"));
  EXPECT_EQ(failed.calls, 2);

  server.stop();
  thread.join();
}

TEST(HttpBackendTest, RejectsUnsupportedScheme) {
  GatewayConfig config;
  config.endpoint = "ftp://example.invalid/x";
  EXPECT_FALSE(MakeBackend(config).ok());
}

}  // namespace
}  // namespace promptcomp
