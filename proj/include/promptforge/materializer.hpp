/*  Copyright 2026 The promptforge authors.

    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License. */

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptforge/data_model.hpp"
#include "promptforge/template_lang.hpp"

namespace promptforge {

struct Template {
  std::string id;  // template_id(source, answer_choices_source, name)
  std::string name;
  DatasetRef dataset;
  std::string source;  // full prompt
  std::optional<std::string> answer_choices_source;  // fragment
  bool original_task = true;
  bool choices_in_prompt = false;
  std::vector<std::string> metrics;
  std::string reference;

  friend bool operator==(const Template&, const Template&) = default;
};

/// Stable content hash, 16 lowercase hex digits.
std::string template_id(std::string_view source,
                        const std::optional<std::string>& answer_choices_source,
                        std::string_view name);

/// Sets t.id from its content and returns it.
const std::string& assign_id(Template& t);

nlohmann::ordered_json template_to_json(const Template& t);
/// Missing id is computed from content. Throws ValidationError on bad shape.
Template template_from_json(const nlohmann::json& j);

/// A template with its sources parsed once.
struct CompiledTemplate {
  Template meta;
  tmpl::TemplateAst ast;
  std::optional<tmpl::TemplateAst> choices_ast;

  /// Throws SyntaxError / SeparatorError.
  static CompiledTemplate compile(Template t);
};

/// Renders the answer-choices fragment and splits it on `|||`, trimming
/// each option. nullopt when the template has no choices source. Throws
/// EmptyChoices when every option is empty; render errors propagate.
std::optional<std::vector<std::string>> render_answer_choices(const CompiledTemplate& t,
                                                              const Example& ex,
                                                              std::uint64_t seed);

struct PromptedInstance {
  DatasetRef dataset;
  std::string split;
  std::uint64_t example_ordinal = 0;
  std::string template_id;
  std::string input;
  std::string target;
  std::optional<std::vector<std::string>> answer_choices;
  std::vector<tmpl::Span> spans_input;
  std::vector<tmpl::Span> spans_target;

  friend bool operator==(const PromptedInstance&, const PromptedInstance&) = default;
};

nlohmann::ordered_json instance_to_json(const PromptedInstance& p);
PromptedInstance instance_from_json(const nlohmann::json& j);
/// One compact JSON line without the trailing newline.
std::string instance_to_line(const PromptedInstance& p);
std::vector<PromptedInstance> read_instances(const std::string& path);
void write_instances(const std::string& path, const std::vector<PromptedInstance>& items);

struct ExampleFailure {
  std::uint64_t ordinal = 0;
  std::string kind;  // error kind(), e.g. MissingField
  std::string message;
};

struct SkipStats {
  std::uint64_t examples = 0;  // examples read
  std::uint64_t emitted = 0;   // instances produced
  std::uint64_t skipped = 0;   // empty input or target
  std::uint64_t errors = 0;    // render failures
  std::vector<ExampleFailure> failures;  // first kMaxFailures only

  static constexpr std::size_t kMaxFailures = 100;
  void merge(const SkipStats& other);
  nlohmann::ordered_json to_json() const;
};

struct MaterializeOptions {
  std::uint64_t seed = 0;
  tmpl::ChoiceMode choice_mode = tmpl::ChoiceMode::Seeded;
  std::uint64_t max_combinations = 64;
  unsigned workers = 1;
  std::string split = "train";
};

using ExampleSource = std::function<std::optional<Example>()>;
using InstanceSink = std::function<void(PromptedInstance&&)>;

/// Per-example seed used for both the choices fragment and the prompt.
std::uint64_t example_seed(std::uint64_t seed, std::uint64_t ordinal) noexcept;

/// Renders one example. Appends zero or more instances; updates stats.
void materialize_example(const CompiledTemplate& t, const Example& ex,
                         const MaterializeOptions& opt, std::vector<PromptedInstance>& out,
                         SkipStats& stats);

/// Streams instances to sink in ordinal order, whatever the worker count.
SkipStats materialize(const CompiledTemplate& t, const ExampleSource& source,
                      const MaterializeOptions& opt, const InstanceSink& sink);

std::vector<PromptedInstance> materialize(const CompiledTemplate& t,
                                          const std::vector<Example>& examples,
                                          const MaterializeOptions& opt,
                                          SkipStats* stats = nullptr);

struct TemplateSummary {
  std::string template_id;
  std::string name;
  std::string path;
  SkipStats stats;
};

struct MaterializeSummary {
  std::string dataset;
  std::string split;
  std::vector<TemplateSummary> templates;
  nlohmann::ordered_json to_json() const;
};

/// Writes <out_dir>/<template_id>.jsonl for each template. Throws IoError.
MaterializeSummary materialize_dataset(const std::vector<Template>& templates,
                                       const DatasetDescriptor& dataset,
                                       const MaterializeOptions& opt,
                                       const std::string& out_dir);

}  // namespace promptforge
