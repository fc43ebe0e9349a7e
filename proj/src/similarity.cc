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

#include "promptcomp/similarity.h"

#include <cctype>
#include <cmath>
#include <map>

#include "absl/container/flat_hash_map.h"

namespace promptcomp {

std::vector<std::string> WordTokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (const char raw : text) {
    const unsigned char c = static_cast<unsigned char>(raw);
    if (c >= 0x80 || std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace {

using TermCounts = std::map<std::string, double>;

TermCounts CountTerms(std::string_view text) {
  TermCounts counts;
  for (std::string& token : WordTokens(text)) counts[std::move(token)] += 1.0;
  return counts;
}

double Cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size() && i < b.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

std::vector<double> TfidfScorer::Score(
    std::string_view query,
    const std::vector<std::string_view>& documents) const {
  std::vector<TermCounts> doc_terms;
  doc_terms.reserve(documents.size());
  absl::flat_hash_map<std::string, int> document_frequency;
  for (const std::string_view doc : documents) {
    doc_terms.push_back(CountTerms(doc));
    for (const auto& [term, count] : doc_terms.back()) {
      ++document_frequency[term];
    }
  }
  const double n = static_cast<double>(documents.size());
  auto idf = [&](const std::string& term) {
    auto it = document_frequency.find(term);
    const double df = it == document_frequency.end() ? 0.0 : it->second;
    return std::log((1.0 + n) / (1.0 + df)) + 1.0;
  };

  const TermCounts query_terms = CountTerms(query);
  double query_norm = 0;
  for (const auto& [term, count] : query_terms) {
    const double w = count * idf(term);
    query_norm += w * w;
  }
  query_norm = std::sqrt(query_norm);

  std::vector<double> scores;
  scores.reserve(documents.size());
  for (const TermCounts& terms : doc_terms) {
    double dot = 0, norm = 0;
    for (const auto& [term, count] : terms) {
      const double weight = idf(term);
      const double w = count * weight;
      norm += w * w;
      auto q = query_terms.find(term);
      if (q != query_terms.end()) dot += w * q->second * weight;
    }
    norm = std::sqrt(norm);
    scores.push_back(norm == 0 || query_norm == 0 ? 0.0
                                                  : dot / (norm * query_norm));
  }
  return scores;
}

std::vector<double> EmbeddingScorer::Score(
    std::string_view query,
    const std::vector<std::string_view>& documents) const {
  const std::vector<double> q = embed_(query);
  std::vector<double> scores;
  scores.reserve(documents.size());
  for (const std::string_view doc : documents) {
    scores.push_back(Cosine(q, embed_(doc)));
  }
  return scores;
}

}  // namespace promptcomp
