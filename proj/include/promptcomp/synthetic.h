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

#ifndef PROMPTCOMP_SYNTHETIC_H_
#define PROMPTCOMP_SYNTHETIC_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "promptcomp/composition_space.h"
#include "promptcomp/corpus_store.h"

namespace promptcomp {

// Planted corpus: each instance has exactly one composition that labels it
// correctly, and its text carries a marker word naming that composition.

// The planted composition of an instance, a pure function of its id.
uint64_t PlantedComposition(std::string_view instance_id,
                            uint64_t num_compositions);

// Marker word for composition `c`.
std::string PlantedMarker(uint64_t c);

struct PlantedCorpusOptions {
  int train = 1000;
  int validation = 200;
  int test = 200;
  uint64_t num_compositions = 8;
  int filler_words = 12;
  uint64_t seed = 42;
};

std::vector<Instance> GeneratePlantedCorpus(const PlantedCorpusOptions& options);

// Three singleton techniques (persona, definition, stimulus): 8 compositions.
CompositionSpace PlantedSpace();

}  // namespace promptcomp

#endif  // PROMPTCOMP_SYNTHETIC_H_
