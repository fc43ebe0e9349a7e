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

#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace promptcomp {

namespace {

absl::Status CheckLengths(std::span<const int> truth,
                          std::span<const int> predicted) {
  if (truth.size() != predicted.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("length mismatch: ", truth.size(), " labels vs ",
                     predicted.size(), " predictions"));
  }
  return absl::OkStatus();
}

double ClassF1(std::span<const int> truth, std::span<const int> predicted,
               int cls) {
  int tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < truth.size(); ++i) {
    const bool is_cls = truth[i] == cls;
    const bool said_cls = predicted[i] == cls;
    if (is_cls && said_cls) ++tp;
    if (!is_cls && said_cls) ++fp;
    if (is_cls && !said_cls) ++fn;
  }
  if (tp + fp == 0 || tp + fn == 0) return 0.0;
  return 2.0 * tp / (2.0 * tp + fp + fn);
}

}  // namespace

absl::StatusOr<double> MacroF1(std::span<const int> truth,
                               std::span<const int> predicted) {
  if (absl::Status s = CheckLengths(truth, predicted); !s.ok()) return s;
  return 0.5 * (ClassF1(truth, predicted, 0) + ClassF1(truth, predicted, 1));
}

absl::StatusOr<double> Accuracy(std::span<const int> truth,
                                std::span<const int> predicted) {
  if (absl::Status s = CheckLengths(truth, predicted); !s.ok()) return s;
  if (truth.empty()) return 0.0;
  int correct = 0;
  for (size_t i = 0; i < truth.size(); ++i) correct += truth[i] == predicted[i];
  return static_cast<double>(correct) / truth.size();
}

absl::StatusOr<Metric> MetricByName(const std::string& name) {
  if (name == "macro_f1") return Metric(&MacroF1);
  if (name == "accuracy") return Metric(&Accuracy);
  return absl::InvalidArgumentError(absl::StrCat("unknown metric \"", name,
                                                 "\""));
}

absl::StatusOr<double> CorrectRatio(std::span<const CompositionId> selections,
                                    const LabelMatrix& matrix) {
  if (selections.size() != static_cast<size_t>(matrix.rows())) {
    return absl::InvalidArgumentError(
        absl::StrCat(selections.size(), " selections for ", matrix.rows(),
                     " instances"));
  }
  if (matrix.rows() == 0) return 0.0;
  int correct = 0;
  for (int r = 0; r < matrix.rows(); ++r) {
    const uint64_t c = selections[r].value;
    if (c >= static_cast<uint64_t>(matrix.num_compositions)) {
      return absl::InvalidArgumentError(
          absl::StrCat("unknown composition id ", c));
    }
    correct += matrix.Correct(r, static_cast<int>(c));
  }
  return static_cast<double>(correct) / matrix.rows();
}

double Mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double sum = 0;
  for (const double v : values) sum += v;
  return sum / values.size();
}

double SampleStdev(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double mean = Mean(values);
  double ss = 0;
  for (const double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (values.size() - 1));
}

absl::StatusOr<TTestResult> OneSidedTTest(std::span<const double> a,
                                          std::span<const double> b,
                                          bool welch) {
  if (a.size() < 2 || b.size() < 2) {
    return absl::InvalidArgumentError("each sample needs at least 2 values");
  }
  for (const double v : a) {
    if (!std::isfinite(v)) return absl::InvalidArgumentError("non-finite value");
  }
  for (const double v : b) {
    if (!std::isfinite(v)) return absl::InvalidArgumentError("non-finite value");
  }
  const double na = a.size(), nb = b.size();
  const double diff = Mean(a) - Mean(b);
  const double va = std::pow(SampleStdev(a), 2);
  const double vb = std::pow(SampleStdev(b), 2);

  TTestResult result;
  double se2 = 0;
  if (welch) {
    se2 = va / na + vb / nb;
    const double num = se2 * se2;
    const double den = (va / na) * (va / na) / (na - 1) +
                       (vb / nb) * (vb / nb) / (nb - 1);
    result.degrees_of_freedom = den > 0 ? num / den : na + nb - 2;
  } else {
    const double pooled = ((na - 1) * va + (nb - 1) * vb) / (na + nb - 2);
    se2 = pooled * (1 / na + 1 / nb);
    result.degrees_of_freedom = na + nb - 2;
  }

  if (se2 == 0) {
    if (diff == 0) {
      result.t = 0;
      result.p = 0.5;
    } else {
      result.t = diff > 0 ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity();
      result.p = diff > 0 ? 0.0 : 1.0;
    }
  } else {
    result.t = diff / std::sqrt(se2);
    const boost::math::students_t dist(result.degrees_of_freedom);
    result.p = boost::math::cdf(boost::math::complement(dist, result.t));
  }
  result.significant_05 = result.p < 0.05;
  result.significant_01 = result.p < 0.01;
  return result;
}

std::vector<FrequencyStat> SelectionFrequencies(
    const std::vector<std::vector<CompositionId>>& selections_per_seed,
    int num_compositions) {
  std::vector<FrequencyStat> out(num_compositions);
  if (selections_per_seed.empty()) return out;
  std::vector<std::vector<double>> counts(
      num_compositions, std::vector<double>(selections_per_seed.size(), 0.0));
  for (size_t s = 0; s < selections_per_seed.size(); ++s) {
    for (const CompositionId id : selections_per_seed[s]) {
      if (id.value < static_cast<uint64_t>(num_compositions)) {
        counts[id.value][s] += 1;
      }
    }
  }
  for (int c = 0; c < num_compositions; ++c) {
    const double mean = Mean(counts[c]);
    double ss = 0;
    for (const double v : counts[c]) ss += (v - mean) * (v - mean);
    out[c] = {mean, std::sqrt(ss / counts[c].size())};
  }
  return out;
}

}  // namespace promptcomp
