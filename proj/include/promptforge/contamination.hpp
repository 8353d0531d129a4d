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
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptforge/tokenizer.hpp"

namespace promptforge {

/// Token ids at or above this value are document separators; each
/// separator id is unique, so no match can cross a document boundary.
inline constexpr std::uint32_t kSeparatorBase = 0x8000'0000u;

class Vocabulary {
 public:
  std::uint32_t intern(const std::string& token);
  std::optional<std::uint32_t> find(const std::string& token) const;
  const std::string& token(std::uint32_t id) const { return tokens_.at(id); }
  std::size_t size() const noexcept { return tokens_.size(); }

 private:
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::vector<std::string> tokens_;
};

struct CorpusIndex {
  std::vector<std::uint32_t> tokens;
  std::vector<std::uint32_t> suffix_array;
  std::vector<std::size_t> doc_boundaries;  // start position of each document
  Vocabulary vocabulary;
  Tokenizer tokenizer;

  std::size_t num_documents() const noexcept { return doc_boundaries.size(); }
};

/// Suffix array of an integer sequence by prefix doubling with radix
/// sorting, O(n log n).
std::vector<std::uint32_t> build_suffix_array(const std::vector<std::uint32_t>& s);

/// Throws EmptyCorpus when there are no documents or no tokens.
CorpusIndex build_index(const std::vector<std::string>& documents, Tokenizer tokenizer = {});

/// One document per line; for *.jsonl files each line is an object whose
/// "text" field is the document. Throws IoError / ParseError / EmptyCorpus.
CorpusIndex build_index_from_file(const std::string& path, Tokenizer tokenizer = {});

/// Occurrences of the contiguous token sequence. Unknown tokens give 0.
std::uint64_t count_ngram(const CorpusIndex& index, const std::vector<std::string>& ngram);
std::uint64_t count_ngram(const CorpusIndex& index, const std::string& text);

struct ScanField {
  std::string name;
  std::string text;
};

struct ScanExample {
  std::string id;
  std::vector<ScanField> fields;
};

struct FieldScan {
  std::string field;
  std::size_t tokens = 0;
  std::size_t groups = 0;
  std::size_t dropped = 0;  // trailing tokens that did not fill a group
  std::size_t matched_groups = 0;
  bool flagged = false;
};

struct ExampleScan {
  std::size_t index = 0;
  std::string id;
  std::vector<FieldScan> fields;
  bool flagged = false;
};

struct MatchCount {
  std::size_t matched = 0;
  std::size_t total = 0;
  std::string str() const { return std::to_string(matched) + "/" + std::to_string(total); }
};

struct ScanReport {
  std::size_t group = 16;
  std::vector<ExampleScan> examples;
  std::map<std::string, MatchCount> per_field;  // examples flagged on that field
  MatchCount overall;                            // examples flagged on any field
  std::vector<std::size_t> flagged;              // indices, for manual inspection

  nlohmann::ordered_json to_json() const;
  /// Two-row table: field names over matched/total counts.
  std::string table(const std::string& task = "") const;
};

/// Partitions each field's tokens into consecutive groups of `group`
/// (dropping a short final group) and flags a field when any group occurs in
/// the corpus. Throws ValidationError when group is 0.
ScanReport scan_examples(const CorpusIndex& index, const std::vector<ScanExample>& examples,
                         std::size_t group = 16);

}  // namespace promptforge
