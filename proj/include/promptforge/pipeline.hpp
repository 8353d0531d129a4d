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

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptforge/data_model.hpp"
#include "promptforge/store.hpp"

namespace promptforge {

/// Registry plus template store: everything a pipeline step reads.
struct Workspace {
  TemplateStore store;
  std::vector<DatasetDescriptor> registry;

  Workspace(TemplateStore s, std::vector<DatasetDescriptor> r)
      : store(std::move(s)), registry(std::move(r)) {}

  /// Throws NotFound.
  const DatasetDescriptor& dataset(const std::string& key) const;
  /// Registry datasets that have stored templates, or the requested ones.
  std::vector<const DatasetDescriptor*> select(const nlohmann::json& req) const;
};

/// Output of one step. body is what the CLI prints and what the API returns,
/// byte for byte. notes carries side information (e.g. counts) that is
/// reported but not part of the artifact.
struct StepOutput {
  std::string body;
  std::string content_type = "application/json";
  nlohmann::ordered_json notes = nlohmann::ordered_json::object();
};

/// Pretty JSON text with a trailing newline, as used by every JSON body.
std::string json_body(const nlohmann::ordered_json& j);

/// Each step takes the same JSON request the HTTP API accepts. Bad or
/// missing request fields raise ValidationError.
///
/// ingest:      {}                             -> registry summary and report
/// materialize: {dataset|datasets, split, templates, seed, choice_mode,
///               max_combinations, workers, out_dir}
///                                             -> summary; writes
///               <out_dir>/<dataset key>/<split>/<template id>.jsonl
/// mix:         {spec} | {datasets, split, cap, seed, draws, instances_dir}
///                                             -> JSONL of draws, or of the
///               drawn instances when instances_dir is given
/// pack:        {instances, max_input, max_target, tokenizer}
///                                             -> JSONL of packed sequences
/// eval:        {dataset|datasets, split, templates, instances_dir, scorer,
///               workers}                      -> array of reports
/// scan:        {corpus, examples, group, fields, task, tokenizer}
///                                             -> contamination report
/// stats:       {}                             -> collection statistics
/// preview:     {template, dataset, split, example_ordinal | example, seed,
///               choice_mode, choice_index}    -> rendered prompt or
///               diagnostics
StepOutput run_ingest(const Workspace& ws, const nlohmann::json& req);
StepOutput run_materialize(const Workspace& ws, const nlohmann::json& req);
StepOutput run_mix(const Workspace& ws, const nlohmann::json& req);
StepOutput run_pack(const nlohmann::json& req);
StepOutput run_eval(const Workspace& ws, const nlohmann::json& req);
StepOutput run_scan(const nlohmann::json& req);
StepOutput run_stats(const Workspace& ws);
StepOutput run_preview(const Workspace& ws, const nlohmann::json& req);

/// {kind, message} plus cause/line/column/field where known.
nlohmann::ordered_json error_json(const std::exception& e);

}  // namespace promptforge
