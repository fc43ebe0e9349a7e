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

#include "promptcomp/corpus_store.h"

#include <filesystem>
#include <fstream>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "promptcomp/csv.h"
#include "promptcomp/hashing.h"
#include "promptcomp/prediction_cache.h"

namespace promptcomp {
namespace {

using ::testing::ElementsAre;
using ::testing::HasSubstr;

std::string TempPath(const std::string& name) {
  const auto dir = std::filesystem::path(::testing::TempDir()) /
                   ::testing::UnitTest::GetInstance()->current_test_info()->name();
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

void WriteFile(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

Instance Make(std::string id, int label, Split split,
              std::optional<std::string> category = std::nullopt) {
  Instance instance;
  instance.id = std::move(id);
  instance.text = "text of " + instance.id;
  instance.label = label;
  instance.split = split;
  instance.category = std::move(category);
  return instance;
}

PredictionRecord Record(std::string instance, uint64_t composition,
                        std::optional<int> label, std::string raw = "") {
  PredictionRecord r;
  r.instance_id = std::move(instance);
  r.composition_id = CompositionId{composition};
  r.model_id = "m";
  r.seed = 0;
  r.predicted_label = label;
  r.raw_output = raw.empty() ? (label ? (*label ? "Yes" : "No") : "??") : raw;
  if (!label) r.error = "parse_failure";
  return r;
}

TEST(CorpusTest, LoadsFourLines) {
  const std::string path = TempPath("c.jsonl");
  WriteFile(path,
            "{\"id\":\"a\",\"text\":\"x\",\"label\":1,\"split\":\"train\"}\n"
            "{\"id\":\"b\",\"text\":\"y\",\"label\":0,\"split\":\"validation\"}\n"
            "\n"
            "{\"id\":\"c\",\"text\":\"z\",\"label\":0,\"split\":\"test\",\"category\":\"race\"}\n"
            "{\"id\":\"d\",\"text\":\"w\",\"label\":1,\"split\":\"test\"}\n");
  const auto corpus = LoadCorpus(path);
  ASSERT_TRUE(corpus.ok()) << corpus.status();
  ASSERT_EQ(corpus->size(), 4u);
  EXPECT_EQ((*corpus)[1].split, Split::kValidation);
  EXPECT_EQ((*corpus)[2].category, "race");
  EXPECT_FALSE((*corpus)[3].category.has_value());
  EXPECT_EQ(FilterSplit(*corpus, Split::kTest).size(), 2u);
}

TEST(CorpusTest, DuplicateIdIsNamed) {
  const std::string path = TempPath("c.jsonl");
  WriteFile(path,
            "{\"id\":\"dup\",\"text\":\"x\",\"label\":1,\"split\":\"train\"}\n"
            "{\"id\":\"dup\",\"text\":\"y\",\"label\":0,\"split\":\"train\"}\n");
  const auto corpus = LoadCorpus(path);
  ASSERT_FALSE(corpus.ok());
  EXPECT_THAT(std::string(corpus.status().message()), HasSubstr("dup"));
}

TEST(CorpusTest, MalformedLineReportsLineNumber) {
  const std::string path = TempPath("c.jsonl");
  WriteFile(path,
            "{\"id\":\"a\",\"text\":\"x\",\"label\":1,\"split\":\"train\"}\n"
            "{not json\n");
  const auto corpus = LoadCorpus(path);
  ASSERT_FALSE(corpus.ok());
  EXPECT_THAT(std::string(corpus.status().message()), HasSubstr("2"));
}

TEST(CorpusTest, UnknownSplitAndBadLabelRejected) {
  const std::string path = TempPath("c.jsonl");
  WriteFile(path, "{\"id\":\"a\",\"text\":\"x\",\"label\":1,\"split\":\"dev\"}\n");
  EXPECT_FALSE(LoadCorpus(path).ok());
  WriteFile(path, "{\"id\":\"a\",\"text\":\"x\",\"label\":2,\"split\":\"train\"}\n");
  EXPECT_FALSE(LoadCorpus(path).ok());
  EXPECT_FALSE(LoadCorpus(TempPath("missing.jsonl")).ok());
}

TEST(CorpusTest, WriteReadRoundTripKeepsCategories) {
  const std::vector<Instance> corpus = {
      Make("a", 0, Split::kTrain, "race"), Make("b", 1, Split::kTest, "gender"),
      Make("c", 1, Split::kValidation)};
  const std::string path = TempPath("rt.jsonl");
  ASSERT_TRUE(WriteCorpus(path, corpus).ok());
  const auto loaded = LoadCorpus(path);
  ASSERT_TRUE(loaded.ok());
  ASSERT_EQ(loaded->size(), 3u);
  for (size_t i = 0; i < corpus.size(); ++i) {
    EXPECT_EQ((*loaded)[i].id, corpus[i].id);
    EXPECT_EQ((*loaded)[i].text, corpus[i].text);
    EXPECT_EQ((*loaded)[i].label, corpus[i].label);
    EXPECT_EQ((*loaded)[i].split, corpus[i].split);
    EXPECT_EQ((*loaded)[i].category, corpus[i].category);
  }
  EXPECT_THAT(Categories(*loaded), ElementsAre("gender", "race"));
}

TEST(CorpusTest, SplitNames) {
  EXPECT_EQ(SplitName(Split::kValidation), "validation");
  EXPECT_EQ(*ParseSplit("test"), Split::kTest);
  EXPECT_FALSE(ParseSplit("dev").ok());
}

TEST(RecordTest, JsonRoundTripAndScoring) {
  PredictionRecord r = Record("a", 5, 1);
  ScoreRecord(r, 0);
  EXPECT_EQ(r.correct, false);
  const auto back = RecordFromJson(RecordToJson(r));
  ASSERT_TRUE(back.ok());
  EXPECT_EQ(*back, r);
  PredictionRecord null = Record("a", 5, std::nullopt);
  ScoreRecord(null, 1);
  EXPECT_FALSE(null.correct.has_value());
  EXPECT_EQ(*RecordFromJson(RecordToJson(null)), null);
}

class MatrixTest : public ::testing::Test {
 protected:
  // 3 test instances x 4 compositions; truth (1, 0, 1).
  // Predictions per instance:   c0 c1 c2 c3
  //   i1 (truth 1)               1  0  1  -
  //   i2 (truth 0)               0  0  1  0
  //   i3 (truth 1)               1  1  0  0
  // Correct counts per column: 3, 2, 1, 1.
  void SetUp() override {
    corpus_ = {Make("i1", 1, Split::kTest), Make("t", 0, Split::kTrain),
               Make("i2", 0, Split::kTest), Make("i3", 1, Split::kTest)};
    const int table[3][4] = {{1, 0, 1, -1}, {0, 0, 1, 0}, {1, 1, 0, 0}};
    const char* ids[3] = {"i1", "i2", "i3"};
    for (int i = 2; i >= 0; --i) {
      for (int c = 0; c < 4; ++c) {
        records_.push_back(Record(ids[i], c,
                                  table[i][c] < 0 ? std::nullopt
                                                  : std::optional<int>(table[i][c])));
      }
    }
  }
  std::vector<Instance> corpus_;
  std::vector<PredictionRecord> records_;
};

TEST_F(MatrixTest, HandTalliedCorrectCounts) {
  const auto matrix = BuildLabelMatrix(records_, corpus_, Split::kTest, "m", 0, 4);
  ASSERT_TRUE(matrix.ok()) << matrix.status();
  EXPECT_THAT(matrix->instance_ids, ElementsAre("i1", "i2", "i3"));
  EXPECT_THAT(matrix->truth, ElementsAre(1, 0, 1));
  EXPECT_THAT(matrix->CorrectCounts(), ElementsAre(3, 2, 1, 1));
  EXPECT_EQ(matrix->Predicted(0, 3), -1);
  EXPECT_FALSE(matrix->Correct(0, 3));
  EXPECT_THAT(matrix->Column(0), ElementsAre(1, 0, 1));
}

TEST_F(MatrixTest, ColumnTotalsMatchRecordTotals) {
  const auto matrix = BuildLabelMatrix(records_, corpus_, Split::kTest, "m", 0, 4);
  ASSERT_TRUE(matrix.ok());
  int from_records = 0;
  for (PredictionRecord r : records_) {
    const int truth = r.instance_id == "i2" ? 0 : 1;
    ScoreRecord(r, truth);
    if (r.correct == true) ++from_records;
  }
  int from_columns = 0;
  for (int count : matrix->CorrectCounts()) from_columns += count;
  EXPECT_EQ(from_columns, from_records);
}

TEST_F(MatrixTest, MissingPairIsListed) {
  records_.erase(records_.begin());  // drops (i3, c0)
  const auto matrix = BuildLabelMatrix(records_, corpus_, Split::kTest, "m", 0, 4);
  ASSERT_FALSE(matrix.ok());
  EXPECT_THAT(std::string(matrix.status().message()), HasSubstr("i3"));
}

TEST_F(MatrixTest, OtherModelOrSeedDoesNotCount) {
  EXPECT_FALSE(BuildLabelMatrix(records_, corpus_, Split::kTest, "other", 0, 4).ok());
  EXPECT_FALSE(BuildLabelMatrix(records_, corpus_, Split::kTest, "m", 1, 4).ok());
}

TEST_F(MatrixTest, CsvRoundTrip) {
  const LabelMatrix matrix =
      BuildLabelMatrix(records_, corpus_, Split::kTest, "m", 0, 4).value();
  const std::string prefix = TempPath("test");
  ASSERT_TRUE(WriteLabelMatrixCsv(matrix, prefix).ok());
  const auto back = ReadLabelMatrixCsv(prefix);
  ASSERT_TRUE(back.ok()) << back.status();
  EXPECT_EQ(back->instance_ids, matrix.instance_ids);
  EXPECT_EQ(back->truth, matrix.truth);
  EXPECT_EQ(back->predicted, matrix.predicted);
  EXPECT_EQ(back->num_compositions, 4);
}

TEST(CsvTest, EscapeAndSplit) {
  EXPECT_EQ(csv::Escape("plain"), "plain");
  EXPECT_EQ(csv::Escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv::Escape("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_THAT(csv::SplitLine("x,\"a,b\",\"q\"\"\",,"),
              ElementsAre("x", "a,b", "q\"", "", ""));
}

TEST(HashingTest, KnownDigests) {
  EXPECT_EQ(Sha256Hex(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(Sha256Hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(Fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(Fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(CacheTest, PutThenGet) {
  PredictionCache cache;
  const PredictionRecord r = Record("a", 3, 1);
  EXPECT_FALSE(cache.Get(CacheKey::Of(r)).has_value());
  ASSERT_TRUE(cache.Put(r).ok());
  EXPECT_EQ(cache.Get(CacheKey::Of(r)), r);
  ASSERT_TRUE(cache.Put(r).ok());
  EXPECT_EQ(cache.size(), 1u);
  EXPECT_EQ(cache.conflicts(), 0);
}

TEST(CacheTest, ConflictKeepsNewest) {
  PredictionCache cache;
  ASSERT_TRUE(cache.Put(Record("a", 3, 1, "Yes")).ok());
  ASSERT_TRUE(cache.Put(Record("a", 3, 0, "No")).ok());
  EXPECT_EQ(cache.conflicts(), 1);
  EXPECT_EQ(cache.Get(CacheKey::Of(Record("a", 3, 0)))->raw_output, "No");
}

TEST(CacheTest, PersistsAndReplaysLastWriteWins) {
  const std::string path = TempPath("cache.jsonl");
  {
    auto cache = PredictionCache::Open(path);
    ASSERT_TRUE(cache.ok());
    ASSERT_TRUE(cache->Put(Record("a", 1, 1, "Yes")).ok());
    ASSERT_TRUE(cache->Put(Record("b", 1, 0)).ok());
    ASSERT_TRUE(cache->Put(Record("a", 1, 0, "No")).ok());
  }
  auto reopened = PredictionCache::Open(path);
  ASSERT_TRUE(reopened.ok());
  EXPECT_EQ(reopened->size(), 2u);
  EXPECT_EQ(reopened->Get(CacheKey::Of(Record("a", 1, 0)))->raw_output, "No");
  ASSERT_TRUE(reopened->Compact().ok());
  auto compacted = PredictionCache::Open(path);
  ASSERT_TRUE(compacted.ok());
  EXPECT_EQ(compacted->Records(), reopened->Records());
  std::ifstream in(path);
  int lines = 0;
  for (std::string line; std::getline(in, line);) lines += !line.empty();
  EXPECT_EQ(lines, 2);
}

}  // namespace
}  // namespace promptcomp
