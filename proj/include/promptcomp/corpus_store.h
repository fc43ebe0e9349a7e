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

#ifndef PROMPTCOMP_CORPUS_STORE_H_
#define PROMPTCOMP_CORPUS_STORE_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "json.hpp"
#include "promptcomp/composition_space.h"

namespace promptcomp {

enum class Split { kTrain, kValidation, kTest };

std::string_view SplitName(Split split);
absl::StatusOr<Split> ParseSplit(std::string_view name);

struct Instance {
  std::string id;
  std::string text;
  int label = 0;  // 1 = biased / positive class.
  std::optional<std::string> category;
  Split split = Split::kTrain;
};

// Reads a JSONL corpus (id, text, label, split, optional category). Rejects
// malformed lines with their 1-based line number and duplicate ids.
absl::StatusOr<std::vector<Instance>> LoadCorpus(const std::string& path);
absl::Status WriteCorpus(const std::string& path,
                         const std::vector<Instance>& instances);

std::vector<Instance> FilterSplit(const std::vector<Instance>& instances,
                                  Split split);

// Distinct non-empty categories, sorted.
std::vector<std::string> Categories(const std::vector<Instance>& instances);

struct PredictionRecord {
  std::string instance_id;
  CompositionId composition_id;
  std::string model_id;
  int64_t seed = 0;
  std::string raw_output;
  std::optional<int> predicted_label;
  std::optional<bool> correct;
  // Empty on success; otherwise why the label is missing.
  std::string error;

  friend bool operator==(const PredictionRecord&,
                         const PredictionRecord&) = default;
};

nlohmann::json RecordToJson(const PredictionRecord& record);
absl::StatusOr<PredictionRecord> RecordFromJson(const nlohmann::json& json);

// Fills `correct` from the instance label; null when no label was parsed.
void ScoreRecord(PredictionRecord& record, int truth);

// Per-instance x per-composition outcomes for one split, model and seed.
// Rows follow the split's corpus order; column c is composition id c.
struct LabelMatrix {
  std::vector<std::string> instance_ids;
  std::vector<int> truth;
  int num_compositions = 0;
  // Row-major, size rows * num_compositions. -1 marks a null prediction.
  std::vector<int8_t> predicted;

  int rows() const { return static_cast<int>(instance_ids.size()); }
  int Predicted(int row, int column) const {
    return predicted[static_cast<size_t>(row) * num_compositions + column];
  }
  bool Correct(int row, int column) const {
    return Predicted(row, column) == truth[row];
  }
  std::vector<int> Column(int column) const;
  std::vector<int> CorrectCounts() const;
};

// Requires a record for every (instance, composition) pair of `split`
// under `model_id` and `seed`; null predictions count as incorrect.
absl::StatusOr<LabelMatrix> BuildLabelMatrix(
    const std::vector<PredictionRecord>& records,
    const std::vector<Instance>& corpus, Split split,
    const std::string& model_id, int64_t seed, int num_compositions);

// `<prefix>.correct.csv` holds 0/1 correctness, `<prefix>.pred.csv` holds the
// truth column and predicted labels (empty cell for null).
absl::Status WriteLabelMatrixCsv(const LabelMatrix& matrix,
                                 const std::string& prefix);
absl::StatusOr<LabelMatrix> ReadLabelMatrixCsv(const std::string& prefix);

}  // namespace promptcomp

#endif  // PROMPTCOMP_CORPUS_STORE_H_
