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

#ifndef PROMPTCOMP_COMPOSITION_SPACE_H_
#define PROMPTCOMP_COMPOSITION_SPACE_H_

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "json.hpp"
#include "promptcomp/coalition.h"

namespace promptcomp {

inline constexpr uint64_t kDefaultEnumerationCap = 4096;

enum class TechniqueKind { kSingleton, kVariantGroup };

struct Technique {
  int id = 0;
  std::string name;
  TechniqueKind kind = TechniqueKind::kSingleton;
  // Non-empty iff kind == kVariantGroup.
  std::vector<std::string> variants;

  // Number of distinct choices for this technique, absence included.
  uint64_t Radix() const {
    return kind == TechniqueKind::kSingleton ? 2 : variants.size() + 1;
  }
};

// Dense integer key of a composition. Mixed radix: one digit per technique,
// technique 0 is the least significant digit.
struct CompositionId {
  uint64_t value = 0;
  friend constexpr auto operator<=>(CompositionId, CompositionId) = default;
};

// One point of a composition space. Digit i is 0 when technique i is absent,
// 1 when a singleton is present, and k+1 when variant k of a group is chosen.
struct Composition {
  std::vector<int> selection;

  bool IsBase() const {
    for (int digit : selection) {
      if (digit != 0) return false;
    }
    return true;
  }
  bool Has(int technique) const { return selection[technique] != 0; }
  // Variant index chosen for a variant-group, nullopt when absent.
  std::optional<int> Variant(int technique) const {
    if (selection[technique] == 0) return std::nullopt;
    return selection[technique] - 1;
  }

  friend bool operator==(const Composition&, const Composition&) = default;
};

// Declaration entry used to build a space: a name and optional variants.
struct TechniqueSpec {
  std::string name;
  std::vector<std::string> variants;
};

// Ordered techniques; the order is the prompt order.
class CompositionSpace {
 public:
  static absl::StatusOr<CompositionSpace> Create(
      const std::vector<TechniqueSpec>& specs, std::string name = "");

  // Parses `[{"name": ..., "variants": [...]}, ...]`.
  static absl::StatusOr<CompositionSpace> FromJson(const nlohmann::json& json,
                                                   std::string name = "");
  nlohmann::json ToJson() const;

  const std::string& name() const { return name_; }
  const std::vector<Technique>& techniques() const { return techniques_; }
  int size() const { return static_cast<int>(techniques_.size()); }
  const Technique& technique(int i) const { return techniques_[i]; }
  std::optional<int> IndexOf(std::string_view technique_name) const;

  // 2^|singletons| * prod over groups of (variants + 1).
  uint64_t Count() const { return count_; }

  absl::StatusOr<std::vector<Composition>> Enumerate(
      uint64_t cap = kDefaultEnumerationCap) const;

  absl::StatusOr<CompositionId> Encode(const Composition& composition) const;
  absl::StatusOr<Composition> Decode(CompositionId id) const;

  // Presence bit per technique; variant identity is dropped.
  Coalition CoalitionOf(const Composition& composition) const;

  // The composition realizing `coalition` with each present variant-group
  // using the variant in `variant_fixing` (indexed by technique; ignored for
  // singletons).
  absl::StatusOr<Composition> FromCoalition(
      Coalition coalition, const std::vector<int>& variant_fixing) const;

  // Human-readable form, e.g. "definition+demonstrations:similarity" or
  // "base".
  std::string Describe(const Composition& composition) const;

  // SHA-256 over the canonical JSON of the technique list.
  std::string Fingerprint() const;

  absl::Status Validate(const Composition& composition) const;

 private:
  CompositionSpace() = default;

  std::string name_;
  std::vector<Technique> techniques_;
  uint64_t count_ = 1;
};

// The five-technique space with a three-variant demonstration group, in
// prompt order: persona, definition, demonstrations, stimulus, reasoning.
CompositionSpace DefaultBiasDetectionSpace();

}  // namespace promptcomp

#endif  // PROMPTCOMP_COMPOSITION_SPACE_H_
