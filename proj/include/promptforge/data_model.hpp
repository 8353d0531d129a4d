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
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptforge/value.hpp"

namespace promptforge {

struct Example {
  std::uint64_t ordinal = 0;
  Value fields;  // always a Record
};

enum class FileFormat { Jsonl, Csv };

const char* format_name(FileFormat f) noexcept;
FileFormat parse_format(std::string_view s);  // throws ValidationError

struct SplitInfo {
  std::string path;
  FileFormat format = FileFormat::Jsonl;
  std::uint64_t example_count = 0;
};

struct DatasetRef {
  std::string name;
  std::optional<std::string> subset;

  // "name" or "name/subset".
  std::string key() const;
  friend bool operator==(const DatasetRef&, const DatasetRef&) = default;
  friend auto operator<=>(const DatasetRef&, const DatasetRef&) = default;
};

struct DatasetDescriptor {
  std::string name;
  std::optional<std::string> subset;
  std::map<std::string, SplitInfo> splits;

  DatasetRef ref() const { return {name, subset}; }
};

bool is_split_name(std::string_view s) noexcept;  // train, validation, test

/// Streams the examples of one split in file order. Single consumer.
class ExampleReader {
 public:
  ExampleReader(const std::string& path, FileFormat format);
  ExampleReader(const DatasetDescriptor& d, const std::string& split);
  ~ExampleReader();
  ExampleReader(ExampleReader&&) noexcept;
  ExampleReader& operator=(ExampleReader&&) noexcept;

  /// Next example, or nullopt at end of file. Throws ParseError (with the
  /// 1-based line number), DuplicateKey, or IoError.
  std::optional<Example> next();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::vector<Example> ingest_split(const DatasetDescriptor& d, const std::string& split);
std::vector<Example> read_examples(const std::string& path, FileFormat format);

/// Registry document: {"datasets": [{name, subset?, splits: {split: {path,
/// format, example_count}}}]}. Relative paths resolve against the registry
/// file's directory.
std::vector<DatasetDescriptor> load_registry(const std::string& path);
std::vector<DatasetDescriptor> registry_from_json(const nlohmann::json& j,
                                                  const std::string& base_dir = "");
nlohmann::json registry_to_json(const std::vector<DatasetDescriptor>& registry);

struct RegistryIssue {
  // missing_file, count_mismatch, duplicate, invalid_split, unreadable
  std::string kind;
  std::string dataset;  // DatasetRef::key()
  std::string split;
  std::string detail;
};

struct RegistryReport {
  std::vector<RegistryIssue> issues;
  bool ok() const noexcept { return issues.empty(); }
  nlohmann::json to_json() const;
};

RegistryReport validate_registry(const std::vector<DatasetDescriptor>& registry);

// Lookup by DatasetRef::key(); nullptr when absent.
const DatasetDescriptor* find_dataset(const std::vector<DatasetDescriptor>& registry,
                                      std::string_view key);

}  // namespace promptforge
