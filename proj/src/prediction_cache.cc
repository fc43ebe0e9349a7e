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

#include "promptcomp/prediction_cache.h"

#include <cstdio>
#include <utility>

#include "absl/strings/str_cat.h"

namespace promptcomp {

absl::StatusOr<PredictionCache> PredictionCache::Open(const std::string& path) {
  PredictionCache cache;
  cache.path_ = path;
  {
    std::ifstream in(path);
    std::string line;
    int line_number = 0;
    while (in && std::getline(in, line)) {
      ++line_number;
      if (line.empty()) continue;
      nlohmann::json json = nlohmann::json::parse(line, nullptr, false);
      // A torn final line from an interrupted writer is skipped.
      if (json.is_discarded()) continue;
      absl::StatusOr<PredictionRecord> record = RecordFromJson(json);
      if (!record.ok()) {
        return absl::InvalidArgumentError(absl::StrCat(
            path, ":", line_number, ": ", record.status().message()));
      }
      cache.Insert(*record);
    }
  }
  cache.log_.open(path, std::ios::app);
  if (!cache.log_) {
    return absl::InternalError(absl::StrCat("cannot open cache ", path));
  }
  return cache;
}

PredictionCache::PredictionCache(PredictionCache&& other) noexcept
    : path_(std::move(other.path_)),
      records_(std::move(other.records_)),
      log_(std::move(other.log_)),
      conflicts_(other.conflicts_) {}

void PredictionCache::Insert(const PredictionRecord& record) {
  auto [it, inserted] = records_.try_emplace(CacheKey::Of(record), record);
  if (inserted) return;
  if (it->second.raw_output != record.raw_output) ++conflicts_;
  it->second = record;
}

std::optional<PredictionRecord> PredictionCache::Get(const CacheKey& key) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = records_.find(key);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

absl::Status PredictionCache::Put(const PredictionRecord& record) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = records_.find(CacheKey::Of(record));
  if (it != records_.end() && it->second == record) return absl::OkStatus();
  Insert(record);
  if (log_.is_open()) {
    log_ << RecordToJson(record).dump() << "\n";
    log_.flush();
    if (!log_) return absl::InternalError(absl::StrCat("write failed: ", path_));
  }
  return absl::OkStatus();
}

absl::Status PredictionCache::Compact() {
  std::lock_guard<std::mutex> lock(mu_);
  if (path_.empty()) return absl::OkStatus();
  const std::string tmp = path_ + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    for (const auto& [key, record] : records_) {
      out << RecordToJson(record).dump() << "\n";
    }
    if (!out) return absl::InternalError(absl::StrCat("write failed: ", tmp));
  }
  log_.close();
  if (std::rename(tmp.c_str(), path_.c_str()) != 0) {
    return absl::InternalError(absl::StrCat("cannot replace ", path_));
  }
  log_.open(path_, std::ios::app);
  return absl::OkStatus();
}

size_t PredictionCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return records_.size();
}

int PredictionCache::conflicts() const {
  std::lock_guard<std::mutex> lock(mu_);
  return conflicts_;
}

std::vector<PredictionRecord> PredictionCache::Records() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<PredictionRecord> out;
  out.reserve(records_.size());
  for (const auto& [key, record] : records_) out.push_back(record);
  return out;
}

}  // namespace promptcomp
