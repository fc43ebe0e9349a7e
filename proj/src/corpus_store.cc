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

#include <fstream>
#include <set>
#include <utility>

#include "absl/container/flat_hash_map.h"
#include "absl/container/flat_hash_set.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "promptcomp/csv.h"
#include "promptcomp/status_macros.h"

namespace promptcomp {

std::string_view SplitName(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    case Split::kTest:
      return "test";
  }
  return "train";
}

absl::StatusOr<Split> ParseSplit(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "validation") return Split::kValidation;
  if (name == "test") return Split::kTest;
  return absl::InvalidArgumentError(absl::StrCat("unknown split \"", std::string(name),
                                                 "\""));
}

namespace {

absl::StatusOr<Instance> ParseInstance(const nlohmann::json& json) {
  if (!json.is_object()) return absl::InvalidArgumentError("expected object");
  Instance instance;
  if (!json.contains("id") ||
      !(json["id"].is_string() || json["id"].is_number_integer())) {
    return absl::InvalidArgumentError("missing or invalid \"id\"");
  }
  instance.id = json["id"].is_string() ? json["id"].get<std::string>()
                                       : std::to_string(json["id"].get<int64_t>());
  if (!json.contains("text") || !json["text"].is_string() ||
      json["text"].get<std::string>().empty()) {
    return absl::InvalidArgumentError("missing or empty \"text\"");
  }
  instance.text = json["text"].get<std::string>();
  if (!json.contains("label") || !json["label"].is_number_integer()) {
    return absl::InvalidArgumentError("missing or non-integer \"label\"");
  }
  instance.label = json["label"].get<int>();
  if (instance.label != 0 && instance.label != 1) {
    return absl::InvalidArgumentError("\"label\" must be 0 or 1");
  }
  if (!json.contains("split") || !json["split"].is_string()) {
    return absl::InvalidArgumentError("missing \"split\"");
  }
  ASSIGN_OR_RETURN(instance.split,
                   ParseSplit(json["split"].get<std::string>()));
  if (json.contains("category") && !json["category"].is_null()) {
    if (!json["category"].is_string()) {
      return absl::InvalidArgumentError("\"category\" must be a string");
    }
    instance.category = json["category"].get<std::string>();
  }
  return instance;
}

}  // namespace

absl::StatusOr<std::vector<Instance>> LoadCorpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  std::vector<Instance> out;
  absl::flat_hash_set<std::string> ids;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json json = nlohmann::json::parse(line, nullptr, false);
    if (json.is_discarded()) {
      return absl::InvalidArgumentError(
          absl::StrCat(path, ":", line_number, ": malformed JSON"));
    }
    absl::StatusOr<Instance> instance = ParseInstance(json);
    if (!instance.ok()) {
      return absl::InvalidArgumentError(absl::StrCat(
          path, ":", line_number, ": ", instance.status().message()));
    }
    if (!ids.insert(instance->id).second) {
      return absl::InvalidArgumentError(absl::StrCat(
          path, ":", line_number, ": duplicate id \"", instance->id, "\""));
    }
    out.push_back(*std::move(instance));
  }
  return out;
}

absl::Status WriteCorpus(const std::string& path,
                         const std::vector<Instance>& instances) {
  std::ofstream out(path);
  if (!out) return absl::InternalError(absl::StrCat("cannot write ", path));
  for (const Instance& instance : instances) {
    nlohmann::json json = {{"id", instance.id},
                           {"text", instance.text},
                           {"label", instance.label},
                           {"split", SplitName(instance.split)}};
    if (instance.category) json["category"] = *instance.category;
    out << json.dump() << "\n";
  }
  return out.good() ? absl::OkStatus()
                    : absl::InternalError(absl::StrCat("write failed: ", path));
}

std::vector<Instance> FilterSplit(const std::vector<Instance>& instances,
                                  Split split) {
  std::vector<Instance> out;
  for (const Instance& instance : instances) {
    if (instance.split == split) out.push_back(instance);
  }
  return out;
}

std::vector<std::string> Categories(const std::vector<Instance>& instances) {
  std::set<std::string> categories;
  for (const Instance& instance : instances) {
    if (instance.category && !instance.category->empty()) {
      categories.insert(*instance.category);
    }
  }
  return {categories.begin(), categories.end()};
}

nlohmann::json RecordToJson(const PredictionRecord& record) {
  nlohmann::json json = {
      {"model_id", record.model_id},
      {"composition_id", record.composition_id.value},
      {"instance_id", record.instance_id},
      {"seed", record.seed},
      {"raw_output", record.raw_output},
      {"predicted_label", nullptr},
      {"correct", nullptr},
  };
  if (record.predicted_label) json["predicted_label"] = *record.predicted_label;
  if (record.correct) json["correct"] = *record.correct;
  if (!record.error.empty()) json["error"] = record.error;
  return json;
}

absl::StatusOr<PredictionRecord> RecordFromJson(const nlohmann::json& json) {
  if (!json.is_object()) return absl::InvalidArgumentError("expected object");
  PredictionRecord record;
  try {
    record.model_id = json.at("model_id").get<std::string>();
    record.composition_id.value = json.at("composition_id").get<uint64_t>();
    record.instance_id = json.at("instance_id").get<std::string>();
    record.seed = json.at("seed").get<int64_t>();
    record.raw_output = json.value("raw_output", "");
    if (json.contains("predicted_label") &&
        !json["predicted_label"].is_null()) {
      record.predicted_label = json["predicted_label"].get<int>();
    }
    if (json.contains("correct") && !json["correct"].is_null()) {
      record.correct = json["correct"].get<bool>();
    }
    record.error = json.value("error", "");
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(e.what());
  }
  return record;
}

void ScoreRecord(PredictionRecord& record, int truth) {
  if (record.predicted_label) {
    record.correct = *record.predicted_label == truth;
  } else {
    record.correct.reset();
  }
}

std::vector<int> LabelMatrix::Column(int column) const {
  std::vector<int> out(rows());
  for (int r = 0; r < rows(); ++r) out[r] = Predicted(r, column);
  return out;
}

std::vector<int> LabelMatrix::CorrectCounts() const {
  std::vector<int> counts(num_compositions, 0);
  for (int r = 0; r < rows(); ++r) {
    for (int c = 0; c < num_compositions; ++c) counts[c] += Correct(r, c);
  }
  return counts;
}

absl::StatusOr<LabelMatrix> BuildLabelMatrix(
    const std::vector<PredictionRecord>& records,
    const std::vector<Instance>& corpus, Split split,
    const std::string& model_id, int64_t seed, int num_compositions) {
  LabelMatrix matrix;
  matrix.num_compositions = num_compositions;
  absl::flat_hash_map<std::string, int> row_of;
  for (const Instance& instance : corpus) {
    if (instance.split != split) continue;
    row_of[instance.id] = matrix.rows();
    matrix.instance_ids.push_back(instance.id);
    matrix.truth.push_back(instance.label);
  }
  const size_t cells = static_cast<size_t>(matrix.rows()) * num_compositions;
  matrix.predicted.assign(cells, -1);
  std::vector<bool> seen(cells, false);
  for (const PredictionRecord& record : records) {
    if (record.model_id != model_id || record.seed != seed) continue;
    auto it = row_of.find(record.instance_id);
    if (it == row_of.end()) continue;
    if (record.composition_id.value >= static_cast<uint64_t>(num_compositions)) {
      return absl::InvalidArgumentError(absl::StrCat(
          "record for instance \"", record.instance_id,
          "\" has composition id ", record.composition_id.value,
          " beyond |C| = ", num_compositions));
    }
    const size_t cell = static_cast<size_t>(it->second) * num_compositions +
                        record.composition_id.value;
    matrix.predicted[cell] =
        record.predicted_label ? static_cast<int8_t>(*record.predicted_label)
                               : int8_t{-1};
    seen[cell] = true;
  }
  std::vector<std::string> missing;
  size_t missing_count = 0;
  for (size_t cell = 0; cell < cells; ++cell) {
    if (seen[cell]) continue;
    ++missing_count;
    if (missing.size() < 10) {
      missing.push_back(absl::StrCat(
          matrix.instance_ids[cell / num_compositions], "/",
          cell % num_compositions));
    }
  }
  if (missing_count > 0) {
    return absl::FailedPreconditionError(absl::StrCat(
        missing_count, " (instance, composition) pairs missing for split ",
        std::string(SplitName(split)), ", model ", model_id, ", seed ", seed, ": ",
        absl::StrJoin(missing, ", "), missing_count > 10 ? ", ..." : ""));
  }
  return matrix;
}

absl::Status WriteLabelMatrixCsv(const LabelMatrix& matrix,
                                 const std::string& prefix) {
  std::ofstream correct(prefix + ".correct.csv");
  std::ofstream pred(prefix + ".pred.csv");
  if (!correct || !pred) {
    return absl::InternalError(absl::StrCat("cannot write ", prefix, ".*.csv"));
  }
  correct << "instance_id";
  pred << "instance_id,label";
  for (int c = 0; c < matrix.num_compositions; ++c) {
    correct << "," << c;
    pred << "," << c;
  }
  correct << "\n";
  pred << "\n";
  for (int r = 0; r < matrix.rows(); ++r) {
    const std::string id = csv::Escape(matrix.instance_ids[r]);
    correct << id;
    pred << id << "," << matrix.truth[r];
    for (int c = 0; c < matrix.num_compositions; ++c) {
      correct << "," << (matrix.Correct(r, c) ? 1 : 0);
      pred << ",";
      if (matrix.Predicted(r, c) >= 0) pred << matrix.Predicted(r, c);
    }
    correct << "\n";
    pred << "\n";
  }
  return correct.good() && pred.good()
             ? absl::OkStatus()
             : absl::InternalError(absl::StrCat("write failed: ", prefix));
}

absl::StatusOr<LabelMatrix> ReadLabelMatrixCsv(const std::string& prefix) {
  const std::string path = prefix + ".pred.csv";
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  std::string line;
  if (!std::getline(in, line)) {
    return absl::InvalidArgumentError(absl::StrCat(path, ": empty file"));
  }
  const std::vector<std::string> header = csv::SplitLine(line);
  if (header.size() < 2 || header[0] != "instance_id" || header[1] != "label") {
    return absl::InvalidArgumentError(absl::StrCat(path, ": bad header"));
  }
  LabelMatrix matrix;
  matrix.num_compositions = static_cast<int>(header.size()) - 2;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const std::vector<std::string> fields = csv::SplitLine(line);
    if (fields.size() != header.size()) {
      return absl::InvalidArgumentError(
          absl::StrCat(path, ":", line_number, ": wrong field count"));
    }
    matrix.instance_ids.push_back(fields[0]);
    if (fields[1] != "0" && fields[1] != "1") {
      return absl::InvalidArgumentError(
          absl::StrCat(path, ":", line_number, ": bad label"));
    }
    matrix.truth.push_back(fields[1] == "1");
    for (size_t c = 2; c < fields.size(); ++c) {
      if (fields[c].empty()) {
        matrix.predicted.push_back(-1);
      } else if (fields[c] == "0" || fields[c] == "1") {
        matrix.predicted.push_back(fields[c] == "1");
      } else {
        return absl::InvalidArgumentError(
            absl::StrCat(path, ":", line_number, ": bad cell"));
      }
    }
  }
  return matrix;
}

}  // namespace promptcomp
