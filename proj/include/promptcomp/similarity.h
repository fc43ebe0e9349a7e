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

#ifndef PROMPTCOMP_SIMILARITY_H_
#define PROMPTCOMP_SIMILARITY_H_

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace promptcomp {

// Scores every document against a query; higher is more similar.
class SimilarityScorer {
 public:
  virtual ~SimilarityScorer() = default;
  virtual std::vector<double> Score(
      std::string_view query,
      const std::vector<std::string_view>& documents) const = 0;
};

// Lowercased alphanumeric word tokens. Bytes >= 0x80 count as word
// characters so UTF-8 words stay intact.
std::vector<std::string> WordTokens(std::string_view text);

// Cosine similarity of raw-count TF vectors weighted by the smoothed IDF
// ln((1 + N) / (1 + df)) + 1, with document frequencies taken over the
// documents being scored.
class TfidfScorer : public SimilarityScorer {
 public:
  std::vector<double> Score(
      std::string_view query,
      const std::vector<std::string_view>& documents) const override;
};

// Cosine similarity over vectors from an external embedding provider.
class EmbeddingScorer : public SimilarityScorer {
 public:
  using EmbedFn = std::function<std::vector<double>(std::string_view)>;
  explicit EmbeddingScorer(EmbedFn embed) : embed_(std::move(embed)) {}

  std::vector<double> Score(
      std::string_view query,
      const std::vector<std::string_view>& documents) const override;

 private:
  EmbedFn embed_;
};

}  // namespace promptcomp

#endif  // PROMPTCOMP_SIMILARITY_H_
