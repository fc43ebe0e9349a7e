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

#include "promptcomp/prompt_builder.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <set>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_replace.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"
#include "promptcomp/status_macros.h"

namespace promptcomp {

namespace {

absl::StatusOr<std::string> ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    return absl::NotFoundError(
        absl::StrCat("cannot open template ", path.string()));
  }
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  // A trailing newline is editor noise, not template content.
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) {
    text.pop_back();
  }
  return text;
}

// Prepares a block format for substitution: drops the {hint} placeholder
// when there is no hint, and adds one after the {input} line when the format
// has none but a hint must be shown.
std::string PrepareHint(std::string format, bool with_hint) {
  if (!with_hint) {
    absl::StrReplaceAll({{"{hint}\n", ""}}, &format);
    absl::StrReplaceAll({{"{hint}", ""}}, &format);
    return format;
  }
  if (format.find("{hint}") != std::string::npos) return format;
  const size_t input_at = format.find("{input}");
  if (input_at == std::string::npos) return format + "\n{hint}";
  const size_t line_end = format.find('\n', input_at);
  if (line_end == std::string::npos) return format + "\n{hint}";
  format.insert(line_end, "\n{hint}");
  return format;
}

std::string QuotedList(const std::vector<std::string>& items) {
  std::vector<std::string> quoted;
  quoted.reserve(items.size());
  for (const std::string& item : items) quoted.push_back("'" + item + "'");
  return absl::StrJoin(quoted, ", ");
}

}  // namespace

absl::StatusOr<TemplateSet> LoadTemplateManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  nlohmann::json manifest = nlohmann::json::parse(in, nullptr, false);
  if (manifest.is_discarded() || !manifest.is_object()) {
    return absl::InvalidArgumentError(
        absl::StrCat(path, ": manifest must be a JSON object"));
  }
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  TemplateSet templates;
  for (const auto& [key, value] : manifest.items()) {
    if (key == "stimulus_categories") {
      if (!value.is_array()) {
        return absl::InvalidArgumentError(
            absl::StrCat(path, ": stimulus_categories must be an array"));
      }
      templates.stimulus_categories = value.get<std::vector<std::string>>();
      continue;
    }
    if (!value.is_string()) {
      return absl::InvalidArgumentError(
          absl::StrCat(path, ": \"", key, "\" must be a string"));
    }
    const std::string literal = value.get<std::string>();
    if (key == "positive_output") {
      templates.positive_output = literal;
      continue;
    }
    if (key == "negative_output") {
      templates.negative_output = literal;
      continue;
    }
    ASSIGN_OR_RETURN(std::string text, ReadTextFile(base / literal));
    if (key == "task_description") {
      templates.task_description = std::move(text);
    } else if (key == "output_instruction") {
      templates.output_instruction = std::move(text);
    } else if (key == "input") {
      templates.input_format = std::move(text);
    } else if (key == kPersona) {
      templates.persona = std::move(text);
    } else if (key == kDefinition) {
      templates.definition = std::move(text);
    } else if (key == "demonstrations_header") {
      templates.demonstrations_header = std::move(text);
    } else if (key == kDemonstrations) {
      templates.demonstration_format = std::move(text);
    } else if (key == kStimulus) {
      templates.stimulus_hint = std::move(text);
    } else if (key == kReasoning) {
      for (absl::string_view line : absl::StrSplit(text, '\n')) {
        line = absl::StripAsciiWhitespace(line);
        if (!line.empty()) templates.reasoning_steps.emplace_back(line);
      }
    } else if (key == "reasoning_final") {
      templates.reasoning_final = std::move(text);
    } else {
      templates.custom[key] = std::move(text);
    }
  }
  if (templates.input_format.find("{input}") == std::string::npos) {
    return absl::InvalidArgumentError(
        absl::StrCat(path, ": input template lacks {input}"));
  }
  if (!templates.demonstration_format.empty() &&
      (templates.demonstration_format.find("{input}") == std::string::npos ||
       templates.demonstration_format.find("{output}") == std::string::npos)) {
    return absl::InvalidArgumentError(absl::StrCat(
        path, ": demonstrations template needs {input} and {output}"));
  }
  return templates;
}

std::string_view SegmentKindName(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::kPersona:
      return "persona";
    case SegmentKind::kTaskDescription:
      return "task_description";
    case SegmentKind::kOutputInstruction:
      return "output_instruction";
    case SegmentKind::kDefinition:
      return "definition";
    case SegmentKind::kCustom:
      return "custom";
    case SegmentKind::kDemonstrations:
      return "demonstrations";
    case SegmentKind::kInput:
      return "input";
  }
  return "custom";
}

absl::StatusOr<DemoStrategy> ParseDemoStrategy(std::string_view name) {
  if (name == "random") return DemoStrategy::kRandom;
  if (name == "similarity" || name == "similar") return DemoStrategy::kSimilarity;
  if (name == "category") return DemoStrategy::kCategory;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown demonstration strategy \"", std::string(name), "\""));
}

absl::StatusOr<std::vector<Instance>> SelectDemonstrations(
    const DemonstrationConfig& config, const Instance& instance,
    const std::vector<Instance>& pool, const SimilarityScorer* scorer) {
  if (pool.empty()) {
    return absl::InvalidArgumentError("demonstration pool is empty");
  }
  for (const Instance& candidate : pool) {
    if (candidate.id == instance.id) {
      return absl::InvalidArgumentError(absl::StrCat(
          "instance \"", instance.id, "\" is part of its own pool"));
    }
  }
  std::vector<Instance> out;
  switch (config.strategy) {
    case DemoStrategy::kRandom: {
      if (config.k < 1 || static_cast<size_t>(config.k) > pool.size()) {
        return absl::InvalidArgumentError(absl::StrCat(
            "k = ", config.k, " not in [1, ", pool.size(), "]"));
      }
      std::vector<size_t> order(pool.size());
      std::iota(order.begin(), order.end(), 0);
      std::mt19937_64 rng(config.seed);
      // Partial Fisher-Yates; std::shuffle's draw pattern is
      // implementation-defined.
      for (int i = 0; i < config.k; ++i) {
        const uint64_t span = order.size() - i;
        const size_t j = i + static_cast<size_t>(rng() % span);
        std::swap(order[i], order[j]);
        out.push_back(pool[order[i]]);
      }
      return out;
    }
    case DemoStrategy::kSimilarity: {
      if (config.k < 1 || static_cast<size_t>(config.k) > pool.size()) {
        return absl::InvalidArgumentError(absl::StrCat(
            "k = ", config.k, " not in [1, ", pool.size(), "]"));
      }
      std::vector<std::string_view> texts;
      texts.reserve(pool.size());
      for (const Instance& candidate : pool) texts.push_back(candidate.text);
      const TfidfScorer tfidf;
      const std::vector<double> scores =
          (scorer != nullptr ? scorer : &tfidf)->Score(instance.text, texts);
      std::vector<size_t> order(pool.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return pool[a].id < pool[b].id;
      });
      for (int i = 0; i < config.k; ++i) out.push_back(pool[order[i]]);
      return out;
    }
    case DemoStrategy::kCategory: {
      std::map<std::string, size_t> first_of_category;
      for (size_t i = 0; i < pool.size(); ++i) {
        if (pool[i].category && !pool[i].category->empty()) {
          first_of_category.try_emplace(*pool[i].category, i);
        }
      }
      if (first_of_category.empty()) {
        return absl::FailedPreconditionError(
            "category demonstrations need instances with a category field");
      }
      for (const auto& [category, index] : first_of_category) {
        out.push_back(pool[index]);
      }
      return out;
    }
  }
  return out;
}

absl::StatusOr<RenderedPrompt> Render(const CompositionSpace& space,
                                      const Composition& composition,
                                      const Instance& instance,
                                      const TemplateSet& templates,
                                      const std::vector<Instance>& demos) {
  RETURN_IF_ERROR(space.Validate(composition));
  auto selected = [&](std::string_view name) {
    const std::optional<int> index = space.IndexOf(name);
    return index.has_value() && composition.Has(*index);
  };
  auto missing = [](std::string_view what) {
    return absl::FailedPreconditionError(
        absl::StrCat("no template for selected technique \"", std::string(what), "\""));
  };

  const bool with_demos = selected(kDemonstrations);
  if (with_demos == demos.empty()) {
    return absl::InvalidArgumentError(
        with_demos ? "demonstrations selected but none were supplied"
                   : "demonstrations supplied but the technique is absent");
  }
  const bool with_hint = selected(kStimulus);
  std::string hint;
  if (with_hint) {
    if (templates.stimulus_hint.empty()) return missing(kStimulus);
    hint = absl::StrReplaceAll(
        templates.stimulus_hint,
        {{"{categories}", QuotedList(templates.stimulus_categories)}});
  }
  if (templates.task_description.empty()) return missing("task_description");
  if (templates.output_instruction.empty()) {
    return missing("output_instruction");
  }

  RenderedPrompt prompt;
  if (selected(kPersona)) {
    if (templates.persona.empty()) return missing(kPersona);
    prompt.segments.emplace_back(SegmentKind::kPersona, templates.persona);
  }
  prompt.segments.emplace_back(SegmentKind::kTaskDescription,
                               templates.task_description);
  prompt.segments.emplace_back(SegmentKind::kOutputInstruction,
                               templates.output_instruction);

  for (const Technique& technique : space.techniques()) {
    if (!composition.Has(technique.id)) continue;
    const std::string& name = technique.name;
    if (name == kPersona || name == kStimulus || name == kReasoning) continue;
    if (name == kDefinition) {
      if (templates.definition.empty()) return missing(kDefinition);
      prompt.segments.emplace_back(SegmentKind::kDefinition,
                                   templates.definition);
    } else if (name == kDemonstrations) {
      if (templates.demonstration_format.empty()) return missing(name);
      const std::string format =
          PrepareHint(templates.demonstration_format, with_hint);
      std::vector<std::string> blocks;
      if (!templates.demonstrations_header.empty()) {
        blocks.push_back(templates.demonstrations_header);
      }
      for (const Instance& demo : demos) {
        blocks.push_back(absl::StrReplaceAll(
            format, {{"{input}", demo.text},
                     {"{output}", demo.label == 1 ? templates.positive_output
                                                  : templates.negative_output},
                     {"{hint}", hint}}));
      }
      prompt.segments.emplace_back(SegmentKind::kDemonstrations,
                                   absl::StrJoin(blocks, "\n\n"));
    } else {
      auto it = templates.custom.find(name);
      if (it == templates.custom.end() || it->second.empty()) {
        return missing(name);
      }
      prompt.segments.emplace_back(SegmentKind::kCustom, it->second);
    }
  }

  prompt.segments.emplace_back(
      SegmentKind::kInput,
      absl::StrReplaceAll(PrepareHint(templates.input_format, with_hint),
                          {{"{input}", instance.text}, {"{hint}", hint}}));

  if (selected(kReasoning)) {
    if (templates.reasoning_steps.empty() || templates.reasoning_final.empty()) {
      return missing(kReasoning);
    }
    prompt.reasoning_chain = templates.reasoning_steps;
    prompt.reasoning_chain.push_back(templates.reasoning_final);
  }

  std::vector<absl::string_view> texts;
  for (const auto& [kind, text] : prompt.segments) texts.push_back(text);
  prompt.full_text = absl::StrJoin(texts, "\n\n");
  return prompt;
}

}  // namespace promptcomp
