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

#include "promptcomp/synthetic.h"

#include <array>
#include <random>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "promptcomp/hashing.h"

namespace promptcomp {
namespace {

constexpr std::array<std::string_view, 8> kMarkers = {
    "amber", "basalt", "cobalt", "dune", "ember", "fjord", "garnet", "harbor"};

constexpr std::array<std::string_view, 32> kFiller = {
    "the",    "people", "said",    "every",  "town",   "market", "river",
    "always", "quiet",  "morning", "worker", "street", "school", "coffee",
    "window", "friend", "paper",   "train",  "garden", "letter", "yellow",
    "often",  "small",  "bright",  "table",  "music",  "winter", "number",
    "story",  "little", "across",  "under"};

}  // namespace

uint64_t PlantedComposition(std::string_view instance_id,
                            uint64_t num_compositions) {
  return Mix64(Fnv1a64(instance_id)) % num_compositions;
}

std::string PlantedMarker(uint64_t c) {
  if (c < kMarkers.size()) return std::string(kMarkers[c]);
  return absl::StrCat("marker", c);
}

std::vector<Instance> GeneratePlantedCorpus(const PlantedCorpusOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::vector<Instance> out;
  auto emit = [&](Split split, int count) {
    for (int i = 0; i < count; ++i) {
      Instance instance;
      instance.id = absl::StrCat(std::string(SplitName(split)), "-", i);
      instance.split = split;
      instance.label = static_cast<int>(rng() >> 63);
      std::vector<std::string> words;
      for (int w = 0; w < options.filler_words; ++w) {
        words.emplace_back(kFiller[rng() % kFiller.size()]);
      }
      const std::string marker = PlantedMarker(
          PlantedComposition(instance.id, options.num_compositions));
      words.insert(words.begin() + rng() % (words.size() + 1), marker);
      instance.text = absl::StrJoin(words, " ");
      out.push_back(std::move(instance));
    }
  };
  emit(Split::kTrain, options.train);
  emit(Split::kValidation, options.validation);
  emit(Split::kTest, options.test);
  return out;
}

CompositionSpace PlantedSpace() {
  return CompositionSpace::Create(
             {{"persona", {}}, {"definition", {}}, {"stimulus", {}}}, "planted")
      .value();
}

}  // namespace promptcomp
