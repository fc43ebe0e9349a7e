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

#ifndef PROMPTCOMP_PREDICTION_CACHE_H_
#define PROMPTCOMP_PREDICTION_CACHE_H_

#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "promptcomp/corpus_store.h"

namespace promptcomp {

struct CacheKey {
  std::string model_id;
  uint64_t composition_id = 0;
  std::string instance_id;
  int64_t seed = 0;

  static CacheKey Of(const PredictionRecord& record) {
    return {record.model_id, record.composition_id.value, record.instance_id,
            record.seed};
  }
  friend auto operator<=>(const CacheKey&, const CacheKey&) = default;
};

// Append-only JSONL store of prediction records keyed by
// (model, composition, instance, seed). Loading replays the log with
// last-write-wins. Thread-safe; writes are serialized.
class PredictionCache {
 public:
  // In-memory cache, nothing persisted.
  PredictionCache() = default;

  // Opens (creating if needed) the log at `path` and replays it.
  static absl::StatusOr<PredictionCache> Open(const std::string& path);

  PredictionCache(PredictionCache&& other) noexcept;
  PredictionCache& operator=(PredictionCache&&) = delete;

  std::optional<PredictionRecord> Get(const CacheKey& key) const;

  // No-op for a record identical to the stored one. A stored record with a
  // different raw_output is replaced and counted as a conflict.
  absl::Status Put(const PredictionRecord& record);

  // Rewrites the log with one line per key.
  absl::Status Compact();

  size_t size() const;
  int conflicts() const;
  std::vector<PredictionRecord> Records() const;

 private:
  void Insert(const PredictionRecord& record);

  std::string path_;
  mutable std::mutex mu_;
  std::map<CacheKey, PredictionRecord> records_;
  std::ofstream log_;
  int conflicts_ = 0;
};

}  // namespace promptcomp

#endif  // PROMPTCOMP_PREDICTION_CACHE_H_
