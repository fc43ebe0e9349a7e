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

#ifndef PROMPTCOMP_PROMPT_BUILDER_H_
#define PROMPTCOMP_PROMPT_BUILDER_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "absl/status/statusor.h"
#include "promptcomp/composition_space.h"
#include "promptcomp/corpus_store.h"
#include "promptcomp/similarity.h"

namespace promptcomp {

// Technique names with built-in rendering. Any other technique name is
// rendered from TemplateSet::custom.
inline constexpr std::string_view kPersona = "persona";
inline constexpr std::string_view kDefinition = "definition";
inline constexpr std::string_view kDemonstrations = "demonstrations";
inline constexpr std::string_view kStimulus = "stimulus";
inline constexpr std::string_view kReasoning = "reasoning";

// Prompt texts. Placeholders are written in braces: {input}, {output},
// {hint}, {categories}.
struct TemplateSet {
  std::string task_description;
  // Answer-shape instruction; always follows the task description.
  std::string output_instruction;
  // Input block; must contain {input}, may contain {hint}.
  std::string input_format = "### INPUT\n<{input}>\n{hint}\n### OUTPUT";
  std::string persona;
  std::string definition;
  std::string demonstrations_header;
  // One demonstration; must contain {input} and {output}, may contain {hint}.
  std::string demonstration_format;
  // Hint line; {categories} expands to the quoted category list.
  std::string stimulus_hint;
  std::vector<std::string> stimulus_categories;
  std::vector<std::string> reasoning_steps;
  // Closing question of a reasoning chain; its answer is the label.
  std::string reasoning_final;
  std::string positive_output = "yes";
  std::string negative_output = "no";
  std::map<std::string, std::string> custom;
};

// Reads a manifest JSON mapping template keys (technique names plus
// "task_description", "output_instruction", "input", "demonstrations_header",
// "reasoning_final") to UTF-8 text files relative to the manifest. The
// "reasoning" file holds one sub-question per non-empty line. Optional keys
// "stimulus_categories" (array), "positive_output" and "negative_output"
// are read inline.
absl::StatusOr<TemplateSet> LoadTemplateManifest(const std::string& path);

enum class SegmentKind {
  kPersona,
  kTaskDescription,
  kOutputInstruction,
  kDefinition,
  kCustom,
  kDemonstrations,
  kInput,
};

std::string_view SegmentKindName(SegmentKind kind);

struct RenderedPrompt {
  std::vector<std::pair<SegmentKind, std::string>> segments;
  std::string full_text;
  // Follow-up prompts: the sub-questions, then the final label question.
  // Empty when the reasoning technique is not selected.
  std::vector<std::string> reasoning_chain;
};

enum class DemoStrategy { kRandom, kSimilarity, kCategory };

// Maps a demonstration variant name ("random", "similarity"/"similar",
// "category") to its strategy.
absl::StatusOr<DemoStrategy> ParseDemoStrategy(std::string_view name);

struct DemonstrationConfig {
  DemoStrategy strategy = DemoStrategy::kRandom;
  int k = 1;
  uint64_t seed = 0;
};

// Picks demonstrations for `instance` from `pool`.
//   random: k items from a seeded shuffle; independent of `instance`.
//   similarity: top-k by `scorer` (TF-IDF when null), ties by instance id.
//   category: the first pool item of each category, sorted by category.
absl::StatusOr<std::vector<Instance>> SelectDemonstrations(
    const DemonstrationConfig& config, const Instance& instance,
    const std::vector<Instance>& pool,
    const SimilarityScorer* scorer = nullptr);

// Renders the prompt for `composition`. Segment order: persona, task
// description, output instruction, the remaining context techniques in space
// order, input. The stimulus hint is attached to every demonstration and to
// the input. `demos` must be non-empty exactly when the demonstrations
// technique is selected.
absl::StatusOr<RenderedPrompt> Render(const CompositionSpace& space,
                                      const Composition& composition,
                                      const Instance& instance,
                                      const TemplateSet& templates,
                                      const std::vector<Instance>& demos);

}  // namespace promptcomp

#endif  // PROMPTCOMP_PROMPT_BUILDER_H_
