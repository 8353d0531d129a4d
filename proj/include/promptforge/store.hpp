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

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptforge/materializer.hpp"

namespace promptforge {

struct CollectionStats {
  std::size_t total_prompts = 0;
  std::size_t total_datasets = 0;
  std::map<std::string, std::size_t> prompts_per_dataset;  // by DatasetRef::key()
  double average = 0.0;

  nlohmann::ordered_json to_json() const;
};

/// "name" or "name/subset" back into a DatasetRef. Throws ValidationError
/// for empty or unsafe path components.
DatasetRef parse_dataset_key(std::string_view key);

/// Template collection on disk: <root>/<name>[/<subset>]/templates.json,
/// each an array of template records. Writes go through a temporary file
/// that is fsynced and renamed over the target, and are logged to
/// <root>/journal.jsonl. Copies share locks.
class TemplateStore {
 public:
  explicit TemplateStore(std::filesystem::path root);

  /// Root from PROMPTFORGE_STORE, else the current directory.
  static TemplateStore from_env();

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path dataset_file(const DatasetRef& d) const;

  /// Datasets that have a templates.json, sorted by key.
  std::vector<DatasetRef> datasets() const;
  /// Empty when the dataset has no file. Throws IoError / ValidationError.
  std::vector<Template> load(const DatasetRef& d) const;
  std::optional<Template> find(const DatasetRef& d, std::string_view id) const;

  /// Validates (parse of both sources), assigns the content id and inserts.
  /// Saving an identical template again is a no-op. Throws ValidationError,
  /// ConflictError (same id, different record), IoError.
  std::string save(Template t);

  /// Replaces the template stored under old_id. Throws NotFound,
  /// ValidationError, ConflictError (new id taken by another record), IoError.
  std::string update(const DatasetRef& d, std::string_view old_id, Template t);

  /// Throws NotFound.
  void remove(const DatasetRef& d, std::string_view id);

  CollectionStats stats() const;

  /// Called with a stage name ("write", "fsync", "rename") during each file
  /// replacement; throwing from it simulates a crash at that point.
  using FaultHook = std::function<void(std::string_view stage)>;
  void set_fault_hook(FaultHook hook);

 private:
  struct Shared;
  template <class F>
  std::string modify(const DatasetRef& d, const char* op, F&& change);
  void write_atomic(const std::filesystem::path& file, const std::string& content) const;
  void journal(const nlohmann::ordered_json& entry) const;

  std::filesystem::path root_;
  std::shared_ptr<Shared> shared_;
};

/// Throws ValidationError carrying the cause kind and location when either
/// source fails to parse.
void validate_template(const Template& t);

}  // namespace promptforge
