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

#ifndef PROMPTCOMP_EVALUATION_H_
#define PROMPTCOMP_EVALUATION_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "json.hpp"
#include "promptcomp/composition_space.h"
#include "promptcomp/corpus_store.h"
#include "promptcomp/metrics.h"

namespace promptcomp {

struct BaselineOptions {
  std::vector<uint64_t> random_seeds = {1, 2, 3, 4, 5};
  // Random labels follow the training label prior instead of a fair coin.
  bool random_uses_prior = false;
  // Ensemble label when the vote is tied (or nobody answered).
  int ensemble_tie_label = 0;
  // Welch's t-test instead of the pooled-variance one.
  bool welch = false;
};

struct BaselineScores {
  double random = 0;
  double majority = 0;
  int majority_label = 0;
  double ensemble = 0;
  std::optional<double> best_on_val;
  std::optional<CompositionId> best_on_val_id;
  double best_on_test = 0;
  CompositionId best_on_test_id;
  double oracle = 0;
};

// Macro F1 of every composition column.
absl::StatusOr<std::vector<double>> PerCompositionF1(const LabelMatrix& matrix);

// Per-row majority vote over all compositions' non-null labels.
std::vector<int> EnsemblePredictions(const LabelMatrix& matrix, int tie_label);

// Truth where any composition is correct. Elsewhere the complement of the
// truth, or null when some composition gave a null answer there.
std::vector<int> OraclePredictions(const LabelMatrix& matrix);

// Labels produced by answering each row with its selected composition.
absl::StatusOr<std::vector<int>> SelectedPredictions(
    const LabelMatrix& matrix, const std::vector<CompositionId>& selections);

// `evaluation` is scored; `validation` (optional) picks best-on-val;
// `train_labels` gives the majority class and the random prior.
absl::StatusOr<BaselineScores> RunBaselines(
    const LabelMatrix& evaluation, const LabelMatrix* validation,
    const std::vector<int>& train_labels, const BaselineOptions& options);

struct SeedOutcome {
  uint64_t seed = 0;
  double macro_f1 = 0;
  double correct_ratio = 0;
  std::vector<CompositionId> selections;
};

struct ShapleySelectionRow {
  std::string label;  // e.g. "Best by Shapley values"
  std::string fixing;
  CompositionId composition;
  std::string description;
  double test_f1 = 0;
};

struct EvalReport {
  std::string split;
  std::vector<std::string> composition_names;
  std::vector<double> composition_f1;
  BaselineScores baselines;
  std::vector<SeedOutcome> adaptive;
  double adaptive_mean = 0;
  double adaptive_stdev = 0;
  double adaptive_correct_ratio_mean = 0;
  std::vector<FrequencyStat> selection_frequency;
  std::optional<TTestResult> significance_vs_best_on_test;
  std::vector<ShapleySelectionRow> shapley_rows;
  // Scores supplied from outside (e.g. a fine-tuned classifier).
  std::map<std::string, double> external_scores;
};

// Assembles the report: per-composition scores, baselines, the adaptive
// outcomes across seeds, selection frequencies and a one-sided t-test of
// adaptive vs best-on-test.
absl::StatusOr<EvalReport> Evaluate(const CompositionSpace& space,
                                    const LabelMatrix& evaluation,
                                    const LabelMatrix* validation,
                                    const std::vector<int>& train_labels,
                                    const std::vector<SeedOutcome>& adaptive,
                                    const BaselineOptions& options);

nlohmann::json EvalReportToJson(const EvalReport& report);

// Table with one row per base/single-technique composition, best on test,
// Shapley selections and the adaptive row with significance daggers.
std::string EvalReportMarkdown(const EvalReport& report,
                               const CompositionSpace& space);

}  // namespace promptcomp

#endif  // PROMPTCOMP_EVALUATION_H_
