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

#ifndef PROMPTCOMP_METRICS_H_
#define PROMPTCOMP_METRICS_H_

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "promptcomp/composition_space.h"
#include "promptcomp/corpus_store.h"

namespace promptcomp {

// Labels are 0/1; a prediction of -1 is a null (unparsed) answer.
using Metric = std::function<absl::StatusOr<double>(std::span<const int> truth,
                                                    std::span<const int> predicted)>;

// Unweighted mean of the F1 of classes 0 and 1. A class's F1 is 0 when its
// precision or recall is undefined. Nulls are false negatives of their true
// class and never count as a prediction of either class.
absl::StatusOr<double> MacroF1(std::span<const int> truth,
                               std::span<const int> predicted);

absl::StatusOr<double> Accuracy(std::span<const int> truth,
                                std::span<const int> predicted);

// Metric by name: "macro_f1" or "accuracy".
absl::StatusOr<Metric> MetricByName(const std::string& name);

// Fraction of rows whose selected composition classified the row correctly.
absl::StatusOr<double> CorrectRatio(std::span<const CompositionId> selections,
                                    const LabelMatrix& matrix);

struct TTestResult {
  double t = 0;
  double degrees_of_freedom = 0;
  // P(T >= t) under H0; small values support mean(a) > mean(b).
  double p = 0.5;
  bool significant_05 = false;
  bool significant_01 = false;
};

// One-sided two-sample t-test of H1: mean(a) > mean(b). Student's pooled
// variance by default, Welch's unequal-variance form when `welch`.
absl::StatusOr<TTestResult> OneSidedTTest(std::span<const double> a,
                                          std::span<const double> b,
                                          bool welch = false);

struct FrequencyStat {
  double mean = 0;
  double stdev = 0;  // population
};

// Per composition, mean and population stdev over seeds of how often it was
// selected. Each inner vector is one seed's selections over the split.
std::vector<FrequencyStat> SelectionFrequencies(
    const std::vector<std::vector<CompositionId>>& selections_per_seed,
    int num_compositions);

double Mean(std::span<const double> values);
// Sample standard deviation (n - 1); 0 for fewer than two values.
double SampleStdev(std::span<const double> values);

}  // namespace promptcomp

#endif  // PROMPTCOMP_METRICS_H_
