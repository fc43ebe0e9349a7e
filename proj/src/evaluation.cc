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

#include "promptcomp/evaluation.h"

#include <algorithm>
#include <random>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "promptcomp/status_macros.h"

namespace promptcomp {

absl::StatusOr<std::vector<double>> PerCompositionF1(const LabelMatrix& matrix) {
  std::vector<double> out(matrix.num_compositions);
  for (int c = 0; c < matrix.num_compositions; ++c) {
    ASSIGN_OR_RETURN(out[c], MacroF1(matrix.truth, matrix.Column(c)));
  }
  return out;
}

std::vector<int> EnsemblePredictions(const LabelMatrix& matrix, int tie_label) {
  std::vector<int> out(matrix.rows());
  for (int r = 0; r < matrix.rows(); ++r) {
    int positive = 0, negative = 0;
    for (int c = 0; c < matrix.num_compositions; ++c) {
      const int p = matrix.Predicted(r, c);
      positive += p == 1;
      negative += p == 0;
    }
    out[r] = positive > negative ? 1 : negative > positive ? 0 : tie_label;
  }
  return out;
}

std::vector<int> OraclePredictions(const LabelMatrix& matrix) {
  std::vector<int> out(matrix.rows());
  for (int r = 0; r < matrix.rows(); ++r) {
    bool any_correct = false, any_null = false;
    for (int c = 0; c < matrix.num_compositions; ++c) {
      any_correct |= matrix.Correct(r, c);
      any_null |= matrix.Predicted(r, c) < 0;
    }
    if (any_correct) {
      out[r] = matrix.truth[r];
    } else {
      out[r] = any_null ? -1 : 1 - matrix.truth[r];
    }
  }
  return out;
}

absl::StatusOr<std::vector<int>> SelectedPredictions(
    const LabelMatrix& matrix, const std::vector<CompositionId>& selections) {
  if (selections.size() != static_cast<size_t>(matrix.rows())) {
    return absl::InvalidArgumentError(
        absl::StrCat(selections.size(), " selections for ", matrix.rows(),
                     " instances"));
  }
  std::vector<int> out(matrix.rows());
  for (int r = 0; r < matrix.rows(); ++r) {
    if (selections[r].value >= static_cast<uint64_t>(matrix.num_compositions)) {
      return absl::InvalidArgumentError(
          absl::StrCat("unknown composition id ", selections[r].value));
    }
    out[r] = matrix.Predicted(r, static_cast<int>(selections[r].value));
  }
  return out;
}

namespace {

std::pair<CompositionId, double> BestColumn(const std::vector<double>& f1) {
  size_t best = 0;
  for (size_t c = 1; c < f1.size(); ++c) {
    if (f1[c] > f1[best]) best = c;
  }
  return {CompositionId{best}, f1.empty() ? 0.0 : f1[best]};
}

}  // namespace

absl::StatusOr<BaselineScores> RunBaselines(
    const LabelMatrix& evaluation, const LabelMatrix* validation,
    const std::vector<int>& train_labels, const BaselineOptions& options) {
  if (evaluation.num_compositions < 1) {
    return absl::InvalidArgumentError("matrix has no compositions");
  }
  BaselineScores scores;
  const std::vector<int>& truth = evaluation.truth;

  int positives = 0;
  for (const int label : train_labels) positives += label == 1;
  const int negatives = static_cast<int>(train_labels.size()) - positives;
  scores.majority_label = positives > negatives ? 1 : 0;
  const double prior =
      train_labels.empty() ? 0.5
                           : static_cast<double>(positives) / train_labels.size();

  if (options.random_seeds.empty()) {
    return absl::InvalidArgumentError("random baseline needs seeds");
  }
  double random_total = 0;
  for (const uint64_t seed : options.random_seeds) {
    std::mt19937_64 rng(seed);
    std::vector<int> labels(truth.size());
    for (int& label : labels) {
      if (options.random_uses_prior) {
        label = (rng() >> 11) * 0x1.0p-53 < prior ? 1 : 0;
      } else {
        label = static_cast<int>(rng() >> 63);
      }
    }
    ASSIGN_OR_RETURN(const double f1, MacroF1(truth, labels));
    random_total += f1;
  }
  scores.random = random_total / options.random_seeds.size();

  ASSIGN_OR_RETURN(
      scores.majority,
      MacroF1(truth, std::vector<int>(truth.size(), scores.majority_label)));
  ASSIGN_OR_RETURN(
      scores.ensemble,
      MacroF1(truth, EnsemblePredictions(evaluation, options.ensemble_tie_label)));

  ASSIGN_OR_RETURN(const std::vector<double> test_f1,
                   PerCompositionF1(evaluation));
  std::tie(scores.best_on_test_id, scores.best_on_test) = BestColumn(test_f1);

  if (validation != nullptr) {
    if (validation->num_compositions != evaluation.num_compositions) {
      return absl::InvalidArgumentError(
          "validation and evaluation matrices differ in |C|");
    }
    ASSIGN_OR_RETURN(const std::vector<double> val_f1,
                     PerCompositionF1(*validation));
    const CompositionId chosen = BestColumn(val_f1).first;
    scores.best_on_val_id = chosen;
    scores.best_on_val = test_f1[chosen.value];
  }

  ASSIGN_OR_RETURN(scores.oracle, MacroF1(truth, OraclePredictions(evaluation)));
  return scores;
}

absl::StatusOr<EvalReport> Evaluate(const CompositionSpace& space,
                                    const LabelMatrix& evaluation,
                                    const LabelMatrix* validation,
                                    const std::vector<int>& train_labels,
                                    const std::vector<SeedOutcome>& adaptive,
                                    const BaselineOptions& options) {
  if (evaluation.num_compositions != static_cast<int>(space.Count())) {
    return absl::InvalidArgumentError("matrix width differs from |C|");
  }
  EvalReport report;
  ASSIGN_OR_RETURN(const std::vector<Composition> compositions,
                   space.Enumerate());
  for (const Composition& c : compositions) {
    report.composition_names.push_back(space.Describe(c));
  }
  ASSIGN_OR_RETURN(report.composition_f1, PerCompositionF1(evaluation));
  ASSIGN_OR_RETURN(report.baselines,
                   RunBaselines(evaluation, validation, train_labels, options));
  report.adaptive = adaptive;

  std::vector<double> f1s, ratios;
  std::vector<std::vector<CompositionId>> selections;
  for (const SeedOutcome& outcome : adaptive) {
    f1s.push_back(outcome.macro_f1);
    ratios.push_back(outcome.correct_ratio);
    selections.push_back(outcome.selections);
  }
  report.adaptive_mean = Mean(f1s);
  report.adaptive_stdev = SampleStdev(f1s);
  report.adaptive_correct_ratio_mean = Mean(ratios);
  report.selection_frequency =
      SelectionFrequencies(selections, evaluation.num_compositions);
  if (f1s.size() >= 2) {
    const std::vector<double> best(f1s.size(), report.baselines.best_on_test);
    ASSIGN_OR_RETURN(report.significance_vs_best_on_test,
                     OneSidedTTest(f1s, best, options.welch));
  }
  return report;
}

nlohmann::json EvalReportToJson(const EvalReport& report) {
  nlohmann::json compositions = nlohmann::json::array();
  for (size_t c = 0; c < report.composition_f1.size(); ++c) {
    nlohmann::json entry = {{"id", c},
                            {"name", report.composition_names[c]},
                            {"macro_f1", report.composition_f1[c]}};
    if (c < report.selection_frequency.size()) {
      entry["selected_mean"] = report.selection_frequency[c].mean;
      entry["selected_stdev"] = report.selection_frequency[c].stdev;
    }
    compositions.push_back(std::move(entry));
  }
  const BaselineScores& b = report.baselines;
  nlohmann::json baselines = {
      {"random", b.random},
      {"majority", b.majority},
      {"majority_label", b.majority_label},
      {"ensemble", b.ensemble},
      {"best_on_test", b.best_on_test},
      {"best_on_test_id", b.best_on_test_id.value},
      {"oracle", b.oracle},
      {"best_on_val", nullptr},
      {"best_on_val_id", nullptr},
  };
  if (b.best_on_val) {
    baselines["best_on_val"] = *b.best_on_val;
    baselines["best_on_val_id"] = b.best_on_val_id->value;
  }
  nlohmann::json seeds = nlohmann::json::array();
  for (const SeedOutcome& o : report.adaptive) {
    std::vector<uint64_t> ids;
    for (const CompositionId id : o.selections) ids.push_back(id.value);
    seeds.push_back({{"seed", o.seed},
                     {"macro_f1", o.macro_f1},
                     {"correct_ratio", o.correct_ratio},
                     {"selections", ids}});
  }
  nlohmann::json out = {
      {"split", report.split},
      {"compositions", compositions},
      {"baselines", baselines},
      {"adaptive",
       {{"seeds", seeds},
        {"mean", report.adaptive_mean},
        {"stdev", report.adaptive_stdev},
        {"correct_ratio_mean", report.adaptive_correct_ratio_mean}}},
      {"significance", nullptr},
      {"shapley_selections", nlohmann::json::array()},
      {"external", report.external_scores},
  };
  if (report.significance_vs_best_on_test) {
    const TTestResult& t = *report.significance_vs_best_on_test;
    out["significance"] = {{"t", t.t},
                           {"df", t.degrees_of_freedom},
                           {"p", t.p},
                           {"p_lt_05", t.significant_05},
                           {"p_lt_01", t.significant_01}};
  }
  for (const ShapleySelectionRow& row : report.shapley_rows) {
    out["shapley_selections"].push_back({{"label", row.label},
                                         {"fixing", row.fixing},
                                         {"composition_id", row.composition.value},
                                         {"description", row.description},
                                         {"macro_f1", row.test_f1}});
  }
  return out;
}

namespace {

std::string Row(const std::string& name, const std::string& value) {
  return absl::StrCat("| ", name, " | ", value, " |\n");
}

std::string Score(double v) { return absl::StrFormat("%.3f", v); }

}  // namespace

std::string EvalReportMarkdown(const EvalReport& report,
                               const CompositionSpace& space) {
  std::string md = absl::StrCat("## Macro F1 on the ", report.split, " split\n\n",
                                "| Composition | Macro F1 |\n|---|---:|\n");
  const double best = report.baselines.best_on_test;
  auto bold_if_best = [&](double v) {
    return v >= best - 1e-12 && v >= report.adaptive_mean ? "**" + Score(v) + "**"
                                                          : Score(v);
  };
  // Base composition and each technique on its own.
  absl::StatusOr<std::vector<Composition>> all = space.Enumerate();
  if (all.ok()) {
    for (size_t c = 0; c < all->size(); ++c) {
      const Composition& comp = (*all)[c];
      int present = 0;
      for (const int digit : comp.selection) present += digit != 0;
      if (present > 1) continue;
      std::string name = present == 0 ? "Base composition"
                                      : report.composition_names[c];
      md += Row(name, Score(report.composition_f1[c]));
    }
  }
  const BaselineScores& b = report.baselines;
  md += Row(absl::StrCat("Best on test (",
                         report.composition_names[b.best_on_test_id.value], ")"),
            bold_if_best(b.best_on_test));
  if (b.best_on_val) {
    md += Row(absl::StrCat("Best on val (",
                           report.composition_names[b.best_on_val_id->value],
                           ")"),
              Score(*b.best_on_val));
  }
  for (const ShapleySelectionRow& row : report.shapley_rows) {
    md += Row(absl::StrCat(row.label, " (", row.description, ")"),
              Score(row.test_f1));
  }
  if (!report.adaptive.empty()) {
    std::string marker;
    if (report.significance_vs_best_on_test) {
      if (report.significance_vs_best_on_test->significant_01) {
        marker = "‡ ";
      } else if (report.significance_vs_best_on_test->significant_05) {
        marker = "† ";
      }
    }
    std::string value = marker;
    value += report.adaptive_mean > best ? "**" + Score(report.adaptive_mean) + "**"
                                         : Score(report.adaptive_mean);
    absl::StrAppend(&value, " ± ", Score(report.adaptive_stdev));
    md += Row("Adaptive prompting", value);
  }
  md += "\n| Baseline | Macro F1 |\n|---|---:|\n";
  md += Row("Random", Score(b.random));
  md += Row(absl::StrCat("Majority (label ", b.majority_label, ")"),
            Score(b.majority));
  md += Row("Ensemble", Score(b.ensemble));
  md += Row("Oracle", Score(b.oracle));
  for (const auto& [name, value] : report.external_scores) {
    md += Row(name, Score(value));
  }
  if (report.significance_vs_best_on_test) {
    const TTestResult& t = *report.significance_vs_best_on_test;
    absl::StrAppendFormat(
        &md,
        "\nAdaptive vs best on test: t = %.3f, p = %.3g (one-sided; † p < .05, "
        "‡ p < .01).\n",
        t.t, t.p);
  }
  if (!report.adaptive.empty()) {
    absl::StrAppendFormat(&md, "Correct-composition ratio (mean over seeds): "
                               "%.3f\n",
                          report.adaptive_correct_ratio_mean);
  }
  return md;
}

}  // namespace promptcomp
