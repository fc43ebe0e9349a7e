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

#include "promptcomp/composition_space.h"

#include <limits>
#include <set>
#include <utility>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "promptcomp/hashing.h"

namespace promptcomp {

absl::StatusOr<CompositionSpace> CompositionSpace::Create(
    const std::vector<TechniqueSpec>& specs, std::string name) {
  if (specs.size() > static_cast<size_t>(kMaxPlayers)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "at most ", kMaxPlayers, " techniques are supported, got ",
        specs.size()));
  }
  CompositionSpace space;
  space.name_ = std::move(name);
  std::set<std::string> seen_names;
  for (size_t i = 0; i < specs.size(); ++i) {
    const TechniqueSpec& spec = specs[i];
    if (spec.name.empty()) {
      return absl::InvalidArgumentError(
          absl::StrCat("technique ", i, " has an empty name"));
    }
    if (!seen_names.insert(spec.name).second) {
      return absl::InvalidArgumentError(
          absl::StrCat("duplicate technique name \"", spec.name, "\""));
    }
    std::set<std::string> seen_variants;
    for (const std::string& variant : spec.variants) {
      if (variant.empty() || !seen_variants.insert(variant).second) {
        return absl::InvalidArgumentError(
            absl::StrCat("technique \"", spec.name,
                         "\" has an empty or duplicate variant \"", variant,
                         "\""));
      }
    }
    Technique technique;
    technique.id = static_cast<int>(i);
    technique.name = spec.name;
    technique.kind = spec.variants.empty() ? TechniqueKind::kSingleton
                                           : TechniqueKind::kVariantGroup;
    technique.variants = spec.variants;
    const uint64_t radix = technique.Radix();
    if (space.count_ > std::numeric_limits<uint64_t>::max() / radix) {
      return absl::InvalidArgumentError(
          "composition count does not fit in 64 bits");
    }
    space.count_ *= radix;
    space.techniques_.push_back(std::move(technique));
  }
  return space;
}

absl::StatusOr<CompositionSpace> CompositionSpace::FromJson(
    const nlohmann::json& json, std::string name) {
  if (!json.is_array()) {
    return absl::InvalidArgumentError("space must be a JSON array");
  }
  std::vector<TechniqueSpec> specs;
  for (size_t i = 0; i < json.size(); ++i) {
    const nlohmann::json& entry = json[i];
    if (!entry.is_object() || !entry.contains("name") ||
        !entry["name"].is_string()) {
      return absl::InvalidArgumentError(
          absl::StrCat("/", i, "/name: expected a string"));
    }
    TechniqueSpec spec;
    spec.name = entry["name"].get<std::string>();
    if (entry.contains("variants")) {
      const nlohmann::json& variants = entry["variants"];
      if (!variants.is_array()) {
        return absl::InvalidArgumentError(
            absl::StrCat("/", i, "/variants: expected an array"));
      }
      for (const auto& v : variants) {
        if (!v.is_string()) {
          return absl::InvalidArgumentError(
              absl::StrCat("/", i, "/variants: expected strings"));
        }
        spec.variants.push_back(v.get<std::string>());
      }
    }
    specs.push_back(std::move(spec));
  }
  return Create(specs, std::move(name));
}

nlohmann::json CompositionSpace::ToJson() const {
  nlohmann::json out = nlohmann::json::array();
  for (const Technique& t : techniques_) {
    nlohmann::json entry = {{"name", t.name}};
    if (!t.variants.empty()) entry["variants"] = t.variants;
    out.push_back(std::move(entry));
  }
  return out;
}

std::optional<int> CompositionSpace::IndexOf(
    std::string_view technique_name) const {
  for (const Technique& t : techniques_) {
    if (t.name == technique_name) return t.id;
  }
  return std::nullopt;
}

absl::StatusOr<std::vector<Composition>> CompositionSpace::Enumerate(
    uint64_t cap) const {
  if (count_ > cap) {
    return absl::ResourceExhaustedError(
        absl::StrCat("space too large: ", count_,
                     " compositions exceed the enumeration cap of ", cap));
  }
  std::vector<Composition> out;
  out.reserve(count_);
  Composition current{std::vector<int>(techniques_.size(), 0)};
  for (uint64_t id = 0; id < count_; ++id) {
    out.push_back(current);
    // Mixed-radix increment, least significant digit first.
    for (size_t i = 0; i < techniques_.size(); ++i) {
      if (++current.selection[i] < static_cast<int>(techniques_[i].Radix())) {
        break;
      }
      current.selection[i] = 0;
    }
  }
  return out;
}

absl::Status CompositionSpace::Validate(const Composition& composition) const {
  if (composition.selection.size() != techniques_.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("selection has ", composition.selection.size(),
                     " entries, space has ", techniques_.size(),
                     " techniques"));
  }
  for (size_t i = 0; i < techniques_.size(); ++i) {
    const int digit = composition.selection[i];
    if (digit < 0 || static_cast<uint64_t>(digit) >= techniques_[i].Radix()) {
      return absl::InvalidArgumentError(
          absl::StrCat("invalid choice ", digit, " for technique \"",
                       techniques_[i].name, "\""));
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<CompositionId> CompositionSpace::Encode(
    const Composition& composition) const {
  if (absl::Status s = Validate(composition); !s.ok()) return s;
  uint64_t value = 0;
  for (size_t i = techniques_.size(); i-- > 0;) {
    value = value * techniques_[i].Radix() +
            static_cast<uint64_t>(composition.selection[i]);
  }
  return CompositionId{value};
}

absl::StatusOr<Composition> CompositionSpace::Decode(CompositionId id) const {
  if (id.value >= count_) {
    return absl::OutOfRangeError(absl::StrCat(
        "composition id ", id.value, " out of range [0, ", count_, ")"));
  }
  Composition out{std::vector<int>(techniques_.size(), 0)};
  uint64_t rest = id.value;
  for (size_t i = 0; i < techniques_.size(); ++i) {
    const uint64_t radix = techniques_[i].Radix();
    out.selection[i] = static_cast<int>(rest % radix);
    rest /= radix;
  }
  return out;
}

Coalition CompositionSpace::CoalitionOf(const Composition& composition) const {
  uint32_t bits = 0;
  for (size_t i = 0; i < composition.selection.size(); ++i) {
    if (composition.selection[i] != 0) bits |= 1u << i;
  }
  return Coalition(bits);
}

absl::StatusOr<Composition> CompositionSpace::FromCoalition(
    Coalition coalition, const std::vector<int>& variant_fixing) const {
  if (!coalition.IsSubsetOf(Coalition::Full(size()))) {
    return absl::InvalidArgumentError("coalition has bits beyond the space");
  }
  Composition out{std::vector<int>(techniques_.size(), 0)};
  for (const int i : coalition.Members()) {
    const Technique& t = techniques_[i];
    if (t.kind == TechniqueKind::kSingleton) {
      out.selection[i] = 1;
      continue;
    }
    if (static_cast<size_t>(i) >= variant_fixing.size() ||
        variant_fixing[i] < 0 ||
        variant_fixing[i] >= static_cast<int>(t.variants.size())) {
      return absl::InvalidArgumentError(absl::StrCat(
          "no variant fixed for technique \"", t.name, "\""));
    }
    out.selection[i] = variant_fixing[i] + 1;
  }
  return out;
}

std::string CompositionSpace::Describe(const Composition& composition) const {
  std::vector<std::string> parts;
  for (size_t i = 0; i < techniques_.size(); ++i) {
    const int digit = composition.selection[i];
    if (digit == 0) continue;
    const Technique& t = techniques_[i];
    if (t.kind == TechniqueKind::kSingleton) {
      parts.push_back(t.name);
    } else {
      parts.push_back(absl::StrCat(t.name, ":", t.variants[digit - 1]));
    }
  }
  if (parts.empty()) return "base";
  return absl::StrJoin(parts, "+");
}

std::string CompositionSpace::Fingerprint() const {
  return Sha256Hex(ToJson().dump());
}

CompositionSpace DefaultBiasDetectionSpace() {
  return CompositionSpace::Create(
             {{"persona", {}},
              {"definition", {}},
              {"demonstrations", {"category", "similarity", "random"}},
              {"stimulus", {}},
              {"reasoning", {}}},
             "bias-detection")
      .value();
}

}  // namespace promptcomp
