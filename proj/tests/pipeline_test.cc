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

#include "promptcomp/pipeline.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "promptcomp/config.h"

namespace promptcomp {
namespace {

using ::testing::HasSubstr;

namespace fs = std::filesystem;

const std::string kSource = PROMPTCOMP_SOURCE_DIR;

std::string Slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path FreshDir(const std::string& name) {
  const fs::path dir = fs::path(::testing::TempDir()) / "promptcomp" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

nlohmann::json ExampleConfig(const fs::path& out) {
  return {{"space", "default"},
          {"templates", kSource + "/templates/stereoset/manifest.json"},
          {"corpus", kSource + "/data/stereoset_example/corpus.jsonl"},
          {"output_dir", out.string()},
          {"gateway", {{"endpoint", "mock:"}, {"allowed_labels", {"yes", "no"}},
                       {"output_format", "json"}}},
          {"demonstrations", {{"k", 2}}},
          {"train", {{"epochs", 5}}},
          {"seeds", {1, 2}}};
}

std::vector<ConfigError> Errors(const nlohmann::json& json) {
  std::vector<ConfigError> errors;
  EXPECT_FALSE(ValidateConfigJson(json, kSource, &errors).ok());
  return errors;
}

bool HasPointer(const std::vector<ConfigError>& errors, const std::string& pointer) {
  for (const ConfigError& e : errors) {
    if (e.pointer == pointer) return true;
  }
  return false;
}

TEST(ConfigTest, ExampleIsValidWithDefaults) {
  std::vector<ConfigError> errors;
  const auto config =
      ValidateConfigJson(ExampleConfig(FreshDir("cfg")), kSource, &errors);
  ASSERT_TRUE(config.ok()) << FormatErrors(errors);
  EXPECT_EQ(config->space->Count(), 64u);
  EXPECT_EQ(config->gateway.output_format, OutputFormat::kJson);
  EXPECT_EQ(config->gateway.max_retries, 3);
  EXPECT_EQ(config->game_split, "validation");
  EXPECT_EQ(config->normalized["gateway"]["max_in_flight"], 8);
}

TEST(ConfigTest, DuplicateTechniqueNamed) {
  nlohmann::json json = ExampleConfig(FreshDir("cfg"));
  json["space"] = {{{"name", "persona"}}, {{"name", "persona"}}};
  EXPECT_TRUE(HasPointer(Errors(json), "/space/1/name"));
}

TEST(ConfigTest, MissingTemplateForSelectedTechnique) {
  nlohmann::json json = ExampleConfig(FreshDir("cfg"));
  json["space"] = {{{"name", "persona"}}, {{"name", "glossary"}}};
  const auto errors = Errors(json);
  ASSERT_FALSE(errors.empty());
  EXPECT_THAT(FormatErrors(errors), HasSubstr("glossary"));
}

TEST(ConfigTest, AllErrorsAreReported) {
  nlohmann::json json = ExampleConfig(FreshDir("cfg"));
  json["colour"] = "blue";
  json["gateway"]["max_retries"] = -2;
  json["corpus"] = "/nonexistent/corpus.jsonl";
  const auto errors = Errors(json);
  EXPECT_TRUE(HasPointer(errors, "/colour"));
  EXPECT_TRUE(HasPointer(errors, "/gateway/max_retries"));
  EXPECT_GE(errors.size(), 3u);
}

TEST(ConfigTest, LoadResolvesRelativePaths) {
  std::vector<ConfigError> errors;
  const auto config = LoadConfig(kSource + "/configs/planted.json", &errors);
  ASSERT_TRUE(config.ok()) << FormatErrors(errors);
  EXPECT_TRUE(fs::exists(config->corpus_paths.front()));
  EXPECT_EQ(config->space->Count(), 8u);
}

class PipelineRunTest : public ::testing::Test {
 protected:
  std::unique_ptr<Pipeline> Make(const fs::path& out) {
    std::vector<ConfigError> errors;
    RunConfig config =
        ValidateConfigJson(ExampleConfig(out), kSource, &errors).value();
    return Pipeline::Create(std::move(config)).value();
  }

  void RunAll(Pipeline& p) {
    ASSERT_TRUE(p.Collect({Split::kTrain, Split::kValidation, Split::kTest}).ok());
    ASSERT_TRUE(p.Game(std::nullopt).ok());
    ASSERT_TRUE(p.Shapley(std::nullopt).ok());
    ASSERT_TRUE(p.Select(std::nullopt).ok());
    ASSERT_TRUE(p.Train().ok());
    ASSERT_TRUE(p.Predict(1, Split::kTest).ok());
    ASSERT_TRUE(p.Evaluate().ok());
    ASSERT_TRUE(p.Report().ok());
  }
};

TEST_F(PipelineRunTest, WarmCollectIsFree) {
  const fs::path out = FreshDir("warm");
  auto first = Make(out);
  const CollectSummary cold = first->Collect({Split::kTest}).value();
  EXPECT_GT(cold.upstream_calls, 0);
  first.reset();
  auto second = Make(out);
  const CollectSummary warm = second->Collect({Split::kTest}).value();
  EXPECT_EQ(warm.upstream_calls, 0);
  EXPECT_EQ(second->backend_calls(), 0);
  EXPECT_EQ(warm.cache_hits, cold.records);
}

TEST_F(PipelineRunTest, IdenticalRunsGiveIdenticalArtifacts) {
  const fs::path a = FreshDir("a"), b = FreshDir("b");
  auto pa = Make(a);
  RunAll(*pa);
  auto pb = Make(b);
  RunAll(*pb);
  for (const char* file :
       {"matrices/test.pred.csv", "matrices/validation.correct.csv",
        "games/demonstrations-similarity.csv", "report.md", "report.json",
        "evaluation.json", "predictions/seed-1.test.csv"}) {
    ASSERT_TRUE(fs::exists(a / file)) << file;
    EXPECT_EQ(Slurp(a / file), Slurp(b / file)) << file;
  }
  const std::string report = Slurp(a / "report.md");
  EXPECT_THAT(report, HasSubstr("Adaptive"));
  EXPECT_THAT(report, HasSubstr("Best on test"));
}

TEST_F(PipelineRunTest, ManifestListsArtifactHashes) {
  const fs::path out = FreshDir("manifest");
  auto p = Make(out);
  const CollectSummary summary = p->Collect({Split::kTest}).value();
  ASSERT_TRUE(p->WriteManifest("collect", summary.output, UtcNow()).ok());
  const nlohmann::json manifest =
      nlohmann::json::parse(Slurp(out / "manifests/collect.json"));
  EXPECT_EQ(manifest["space_fingerprint"], p->space().Fingerprint());
  EXPECT_FALSE(manifest["artifacts"].empty());
  EXPECT_EQ(manifest["artifacts"][0]["sha256"].get<std::string>().size(), 64u);
}

TEST(FixingTagTest, FileNameForm) {
  const CompositionSpace space = DefaultBiasDetectionSpace();
  std::vector<int> fixing(5, -1);
  fixing[2] = 1;
  EXPECT_EQ(FixingTag(space, fixing), "demonstrations-similarity");
}

// Runs the command line tool; returns its exit code and fills `output`.
int RunCli(const std::string& args, std::string* output) {
  const fs::path log =
      fs::path(::testing::TempDir()) /
      (std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) +
       ".cli_output.txt");
  const std::string command =
      std::string(PROMPTCOMP_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(command.c_str());
  *output = Slurp(log);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(CliTest, EnumerateDefaultSpace) {
  std::string out;
  ASSERT_EQ(RunCli("enumerate", &out), 0);
  EXPECT_THAT(out, HasSubstr("compositions: 64"));
  EXPECT_THAT(out, HasSubstr("definition+demonstrations:similarity"));
}

TEST(CliTest, UsageErrorsExit64) {
  std::string out;
  EXPECT_EQ(RunCli("enumerate --bogus", &out), 64);
  EXPECT_EQ(RunCli("", &out), 64);
}

TEST(CliTest, InvalidConfigExits1) {
  const fs::path dir = FreshDir("cli_bad");
  std::ofstream(dir / "bad.json") << R"({"space": [{"name": "a"}, {"name": "a"}]})";
  std::string out;
  EXPECT_EQ(RunCli("validate -c " + (dir / "bad.json").string(), &out), 1);
  EXPECT_THAT(out, HasSubstr("/space/1/name"));
}

TEST(CliTest, PartialCollectionExits2) {
  const fs::path dir = FreshDir("cli_partial");
  nlohmann::json json = ExampleConfig(dir / "out");
  json["gateway"]["endpoint"] = "mock:?fail=1";
  json["gateway"]["max_retries"] = 0;
  std::ofstream(dir / "config.json") << json.dump();
  std::string out;
  const std::string base =
      "collect -c " + (dir / "config.json").string() + " --split test";
  EXPECT_EQ(RunCli(base, &out), 2) << out;
  EXPECT_EQ(RunCli(base + " --allow-partial", &out), 0) << out;
}

TEST(CliTest, RunAndPredictText) {
  const fs::path dir = FreshDir("cli_run");
  const std::string config =
      "-c " + kSource + "/configs/stereoset_example.json --output-dir " + dir.string();
  std::string out;
  ASSERT_EQ(RunCli("run " + config, &out), 0) << out;
  EXPECT_TRUE(fs::exists(dir / "report.md"));
  EXPECT_TRUE(fs::exists(dir / "manifests/run.json"));
  ASSERT_EQ(RunCli("predict " + config + " --seed 1 --text 'she is a nurse'", &out), 0)
      << out;
}

}  // namespace
}  // namespace promptcomp
