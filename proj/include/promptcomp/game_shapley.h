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

#ifndef PROMPTCOMP_GAME_SHAPLEY_H_
#define PROMPTCOMP_GAME_SHAPLEY_H_

#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "json.hpp"
#include "promptcomp/coalition.h"
#include "promptcomp/composition_space.h"
#include "promptcomp/corpus_store.h"
#include "promptcomp/metrics.h"

namespace promptcomp {

// Set function over technique coalitions: values[S.bits()] is the
// performance of the composition whose techniques are exactly S.
struct CompositionGame {
  int n = 0;
  std::vector<std::string> player_names;
  // Per technique: chosen variant index for variant-groups, -1 for singletons.
  std::vector<int> variant_fixing;
  std::vector<double> values;
  std::string metric_name = "macro_f1";

  double Value(Coalition s) const { return values[s.bits()]; }
  double EmptyValue() const { return values.front(); }
  double FullValue() const { return values.back(); }
};

// Wraps raw values (size must be 2^n) into a game with generic player names.
absl::StatusOr<CompositionGame> GameFromValues(std::vector<double> values);

// Parses "technique=variant" pairs into a per-technique fixing vector. Every
// variant-group of the space must be fixed exactly once.
absl::StatusOr<std::vector<int>> ParseVariantFixing(
    const CompositionSpace& space, const std::vector<std::string>& assignments);

// Every fixing of the space's variant-groups, in mixed-radix order.
std::vector<std::vector<int>> AllVariantFixings(const CompositionSpace& space);

// Short label such as "demonstrations=similarity"; "none" without groups.
std::string DescribeFixing(const CompositionSpace& space,
                           const std::vector<int>& fixing);

// nu(S) = metric(truth, predictions of the composition realizing S under
// `variant_fixing`).
absl::StatusOr<CompositionGame> BuildGame(const LabelMatrix& matrix,
                                          const CompositionSpace& space,
                                          const std::vector<int>& variant_fixing,
                                          const Metric& metric,
                                          const std::string& metric_name =
                                              "macro_f1");

// phi_i = sum_{S subset N\{i}} |S|!(n-|S|-1)!/n! [nu(S+i) - nu(S)].
absl::StatusOr<std::vector<double>> ExactShapley(const CompositionGame& game);

struct PairValue {
  int i = 0;
  int j = 0;
  double value = 0;
};

// phi_ij = sum_{S subset N\{i,j}} |S|!(n-|S|-2)!/(n-1)!
//          [nu(S+i+j) - nu(S+i) - nu(S+j) + nu(S)],
// for i < j in lexicographic order.
absl::StatusOr<std::vector<PairValue>> PairwiseSii(const CompositionGame& game);

struct ShapleyReport {
  std::vector<std::string> player_names;
  double baseline = 0;    // nu(empty)
  double full_value = 0;  // nu(N)
  std::vector<double> sv;
  std::vector<PairValue> sii_pairs;
  // phi_i - 1/2 sum_{j != i} phi_ij; with the pairs this splits
  // nu(N) - nu(empty) exactly.
  std::vector<double> two_sii_order1;

  double PairValueOf(int i, int j) const;
};

absl::StatusOr<ShapleyReport> TwoSii(const CompositionGame& game);

enum class ReconstructionMode { kSv, kSi };

struct Selection {
  Coalition best;
  // Indexed by coalition bits.
  std::vector<double> predicted;
};

// Additive reconstructions
//   sv: baseline + sum_{i in S} sv_i
//   si: baseline + sum_{i in S} order1_i + sum_{i<j in S} pair_ij
// and their argmax over all coalitions. Ties go to the smaller coalition,
// then to lower bits.
Selection ReconstructAndSelect(const ShapleyReport& report,
                               ReconstructionMode mode);

nlohmann::json ReportToJson(const ShapleyReport& report);

// Force plot: baseline, full value and per-player SVs with sign, largest
// magnitude first. Positive attributions raise performance.
nlohmann::json ForcePlotData(const ShapleyReport& report);

// Network plot: players on a circle as nodes weighted by order-1 terms,
// edges weighted by pairwise interactions.
nlohmann::json NetworkPlotData(const ShapleyReport& report);

std::string ForcePlotSvg(const nlohmann::json& force);
std::string NetworkPlotSvg(const nlohmann::json& network);

// "coalition,value" rows, coalition as decimal bitmask.
absl::Status WriteGameCsv(const CompositionGame& game, const std::string& path);
absl::StatusOr<CompositionGame> ReadGameCsv(const std::string& path);

}  // namespace promptcomp

#endif  // PROMPTCOMP_GAME_SHAPLEY_H_
