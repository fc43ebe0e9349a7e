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

#include "promptcomp/metrics.h"

#include <random>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "oracles.h"
#include "promptcomp/evaluation.h"

namespace promptcomp {
namespace {

using ::testing::ElementsAre;
using ::testing::HasSubstr;

// Builds a matrix from per-row predicted labels.
LabelMatrix Matrix(const std::vector<int>& truth,
                   const std::vector<std::vector<int>>& rows) {
  LabelMatrix m;
  m.num_compositions = static_cast<int>(rows.front().size());
  for (size_t i = 0; i < truth.size(); ++i) {
    m.instance_ids.push_back("r" + std::to_string(i));
    m.truth.push_back(truth[i]);
    for (int p : rows[i]) m.predicted.push_back(static_cast<int8_t>(p));
  }
  return m;
}

TEST(MacroF1Test, PerfectIsOne) {
  EXPECT_DOUBLE_EQ(*MacroF1(std::vector<int>{1, 0, 1}, std::vector<int>{1, 0, 1}), 1.0);
}

TEST(MacroF1Test, HandFixture) {
  const std::vector<int> truth = {1, 1, 0, 0};
  const std::vector<int> predicted = {1, 0, 0, 0};
  // pos F1 2/3, neg F1 0.8.
  EXPECT_NEAR(*MacroF1(truth, predicted), (2.0 / 3.0 + 0.8) / 2, 1e-15);
  EXPECT_NEAR(*MacroF1(truth, predicted), 0.7333, 5e-5);
}

TEST(MacroF1Test, AllNegativeOnBalanced) {
  EXPECT_NEAR(*MacroF1(std::vector<int>{1, 1, 0, 0}, std::vector<int>{0, 0, 0, 0}),
              1.0 / 3.0, 1e-15);
}

TEST(MacroF1Test, NullsAreNeverAPrediction) {
  // truth (1, 0), predicted (null, 0): class 0 P=1 R=1, class 1 undefined.
  EXPECT_NEAR(*MacroF1(std::vector<int>{1, 0}, std::vector<int>{-1, 0}), 0.5, 1e-15);
}

TEST(MacroF1Test, MatchesOracleOnRandomInputs) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 12);
    std::vector<int> truth(n), predicted(n);
    for (int i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng() % 2);
      predicted[i] = static_cast<int>(rng() % 3) - 1;
    }
    EXPECT_NEAR(*MacroF1(truth, predicted), oracle::MacroF1(truth, predicted), 1e-12);
  }
}

TEST(MacroF1Test, LengthMismatchIsAnError) {
  EXPECT_FALSE(MacroF1(std::vector<int>{1}, std::vector<int>{1, 0}).ok());
}

TEST(MetricTest, ByName) {
  EXPECT_TRUE(MetricByName("macro_f1").ok());
  const Metric accuracy = MetricByName("accuracy").value();
  EXPECT_DOUBLE_EQ(*accuracy(std::vector<int>{1, 0, 1, 1}, std::vector<int>{1, 1, 1, -1}),
                   0.5);
  EXPECT_FALSE(MetricByName("auc").ok());
}

TEST(CorrectRatioTest, ThreeOfFour) {
  const LabelMatrix m = Matrix({1, 0, 1, 0}, {{1, 0}, {0, 1}, {0, 1}, {1, 1}});
  const std::vector<CompositionId> selections = {
      CompositionId{0}, CompositionId{0}, CompositionId{1}, CompositionId{0}};
  EXPECT_DOUBLE_EQ(*CorrectRatio(selections, m), 0.75);
}

TEST(CorrectRatioTest, AllCorrectColumn) {
  const LabelMatrix m = Matrix({1, 0}, {{1, 0}, {0, 0}});
  EXPECT_DOUBLE_EQ(*CorrectRatio(std::vector<CompositionId>{CompositionId{0}, CompositionId{0}}, m), 1.0);
}

TEST(CorrectRatioTest, AnyCorrectSelectionCounts) {
  // Five rows; the selected composition decides each row.
  const LabelMatrix m = Matrix({1, 1, 0, 0, 1},
                               {{1, 1, 0}, {0, 1, 0}, {1, 1, 0}, {0, 0, 1}, {0, 0, 0}});
  const std::vector<CompositionId> selections = {
      CompositionId{1}, CompositionId{1}, CompositionId{2}, CompositionId{0},
      CompositionId{0}};
  // Hits: row0 (c1=1), row1 (c1=1), row2 (c2=0), row3 (c0=0); row4 misses.
  EXPECT_DOUBLE_EQ(*CorrectRatio(selections, m), 0.8);
}

TEST(CorrectRatioTest, UnknownCompositionIsAnError) {
  const LabelMatrix m = Matrix({1}, {{1, 0}});
  EXPECT_FALSE(CorrectRatio(std::vector<CompositionId>{CompositionId{2}}, m).ok());
  EXPECT_FALSE(CorrectRatio(std::vector<CompositionId>{}, m).ok());
}

TEST(TTestTest, ReferenceSamples) {
  const std::vector<double> a = {.81, .83, .79, .82, .80};
  const std::vector<double> b = {.71, .73, .69, .72, .70};
  const TTestResult r = OneSidedTTest(a, b).value();
  EXPECT_NEAR(r.t, oracle::kReferenceT, 1e-9);
  EXPECT_NEAR(r.p, oracle::kReferenceP, 1e-12);
  EXPECT_DOUBLE_EQ(r.degrees_of_freedom, 8);
  EXPECT_TRUE(r.significant_01);
  const TTestResult swapped = OneSidedTTest(b, a).value();
  EXPECT_NEAR(swapped.p, 1 - r.p, 1e-12);
}

TEST(TTestTest, UnequalSizesPooledAndWelch) {
  const std::vector<double> a = {.5, .7, .6};
  const std::vector<double> b = {.4, .45, .9, .3};
  const TTestResult pooled = OneSidedTTest(a, b).value();
  EXPECT_NEAR(pooled.t, oracle::kUnequalPooledT, 1e-12);
  EXPECT_NEAR(pooled.p, oracle::kUnequalPooledP, 1e-9);
  const TTestResult welch = OneSidedTTest(a, b, true).value();
  EXPECT_NEAR(welch.t, oracle::kUnequalWelchT, 1e-12);
  EXPECT_NEAR(welch.p, oracle::kUnequalWelchP, 1e-9);
}

TEST(TTestTest, IdenticalAndDegenerateSamples) {
  const std::vector<double> a = {.5, .6, .7};
  const TTestResult same = OneSidedTTest(a, a).value();
  EXPECT_EQ(same.t, 0);
  EXPECT_EQ(same.p, 0.5);
  const std::vector<double> flat_hi = {.9, .9};
  const std::vector<double> flat_lo = {.1, .1};
  EXPECT_EQ(OneSidedTTest(flat_hi, flat_lo)->p, 0.0);
  EXPECT_EQ(OneSidedTTest(flat_lo, flat_hi)->p, 1.0);
  EXPECT_EQ(OneSidedTTest(flat_lo, flat_lo)->p, 0.5);
  EXPECT_FALSE(OneSidedTTest(std::vector<double>{1}, a).ok());
}

TEST(FrequencyTest, SingleSeedAllZero) {
  const auto stats = SelectionFrequencies(
      {{CompositionId{0}, CompositionId{0}, CompositionId{0}}}, 2);
  EXPECT_DOUBLE_EQ(stats[0].mean, 3);
  EXPECT_DOUBLE_EQ(stats[0].stdev, 0);
  EXPECT_DOUBLE_EQ(stats[1].mean, 0);
}

TEST(FrequencyTest, TwoSeedsDisagree) {
  const auto stats =
      SelectionFrequencies({{CompositionId{0}}, {CompositionId{1}}}, 2);
  EXPECT_DOUBLE_EQ(stats[0].mean, 0.5);
  EXPECT_DOUBLE_EQ(stats[0].stdev, 0.5);
  EXPECT_DOUBLE_EQ(stats[1].mean, 0.5);
  EXPECT_DOUBLE_EQ(stats[1].stdev, 0.5);
}

TEST(FrequencyTest, Conservation) {
  std::mt19937_64 rng(5);
  std::vector<std::vector<CompositionId>> per_seed(5);
  for (auto& seed : per_seed) {
    for (int i = 0; i < 40; ++i) seed.push_back(CompositionId{rng() % 8});
  }
  double total = 0;
  for (const FrequencyStat& s : SelectionFrequencies(per_seed, 8)) total += s.mean;
  EXPECT_NEAR(total * 5, 5 * 40, 1e-9);
}

TEST(StatsTest, MeanAndSampleStdev) {
  const std::vector<double> v = {1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(Mean(v), 2.5);
  EXPECT_NEAR(SampleStdev(v), std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_EQ(SampleStdev(std::vector<double>{7}), 0);
}

TEST(BaselineTest, EnsembleVotes) {
  // Row 0: 2 of 3 vote 1. Row 1: tie between 1 and 0 (one null).
  const LabelMatrix m = Matrix({1, 0}, {{1, 1, 0}, {1, 0, -1}});
  EXPECT_THAT(EnsemblePredictions(m, 0), ElementsAre(1, 0));
  EXPECT_THAT(EnsemblePredictions(m, 1), ElementsAre(1, 1));
}

TEST(BaselineTest, OracleUsesAnyCorrect) {
  const LabelMatrix m = Matrix({1, 0, 1}, {{0, 1}, {1, 1}, {0, -1}});
  EXPECT_THAT(OraclePredictions(m), ElementsAre(1, 1, -1));
}

TEST(BaselineTest, AllCorrectColumnGivesOracleAndBestOne) {
  const LabelMatrix m = Matrix({1, 0, 1, 0}, {{0, 1}, {0, 0}, {0, 1}, {1, 0}});
  const auto scores = RunBaselines(m, nullptr, {1, 0, 0}, {});
  ASSERT_TRUE(scores.ok());
  EXPECT_DOUBLE_EQ(scores->oracle, 1.0);
  EXPECT_DOUBLE_EQ(scores->best_on_test, 1.0);
  EXPECT_EQ(scores->best_on_test_id.value, 1u);
  EXPECT_EQ(scores->majority_label, 0);
  EXPECT_NEAR(scores->majority, 1.0 / 3.0, 1e-15);
  EXPECT_FALSE(scores->best_on_val.has_value());
}

TEST(BaselineTest, BestOnValScoredOnTest) {
  const LabelMatrix test = Matrix({1, 0}, {{1, 1}, {1, 0}});
  const LabelMatrix val = Matrix({1, 0}, {{0, 1}, {1, 0}});
  const auto scores = RunBaselines(test, &val, {1}, {});
  ASSERT_TRUE(scores.ok());
  EXPECT_EQ(scores->best_on_val_id->value, 1u);
  EXPECT_DOUBLE_EQ(*scores->best_on_val, 1.0);
  EXPECT_EQ(scores->best_on_test_id.value, 1u);
}

TEST(BaselineTest, DominanceChainOnRandomMatrices) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> truth(30);
    std::vector<std::vector<int>> rows(30, std::vector<int>(6));
    for (int i = 0; i < 30; ++i) {
      truth[i] = static_cast<int>(rng() % 2);
      for (int& p : rows[i]) p = static_cast<int>(rng() % 2);
    }
    const LabelMatrix m = Matrix(truth, rows);
    const BaselineScores s = RunBaselines(m, nullptr, truth, {}).value();
    const std::vector<double> f1 = PerCompositionF1(m).value();
    for (double v : f1) EXPECT_LE(v, s.best_on_test + 1e-15);
    EXPECT_GE(s.oracle, s.best_on_test);
    EXPECT_GE(s.oracle, s.ensemble);
  }
}

}  // namespace
}  // namespace promptcomp
