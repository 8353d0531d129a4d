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

#include "promptforge/data_model.hpp"

#include <filesystem>
#include <set>

#include "promptforge/errors.hpp"
#include "promptforge/template_lang.hpp"

namespace fs = std::filesystem;

namespace promptforge {

const char* format_name(FileFormat f) noexcept {
  return f == FileFormat::Csv ? "csv" : "jsonl";
}

FileFormat parse_format(std::string_view s) {
  if (s == "jsonl") return FileFormat::Jsonl;
  if (s == "csv") return FileFormat::Csv;
  throw ValidationError("unknown data format '" + std::string(s) + "'");
}

std::string DatasetRef::key() const { return subset ? name + "/" + *subset : name; }

bool is_split_name(std::string_view s) noexcept {
  return s == "train" || s == "validation" || s == "test";
}

namespace {

const SplitInfo& split_info(const DatasetDescriptor& d, const std::string& split) {
  auto it = d.splits.find(split);
  if (it == d.splits.end())
    throw IoError("dataset '" + d.ref().key() + "' has no split '" + split + "'");
  return it->second;
}

}  // namespace

// ---------------------------------------------------------------------------

struct ExampleReader::Impl {
  std::ifstream in;
  FileFormat format;
  std::size_t line = 0;  // last line consumed
  std::uint64_t ordinal = 0;
  std::vector<std::string> header;

  bool read_line(std::string& out) {
    if (!std::getline(in, out)) return false;
    ++line;
    if (!out.empty() && out.back() == '\r') out.pop_back();
    return true;
  }

  std::optional<Example> next_jsonl() {
    std::string text;
    while (read_line(text)) {
      if (tmpl::trim_ascii(text).empty()) continue;
      const auto j = parse_json_strict(text, line);
      if (!j.is_object()) throw ParseError("expected a JSON object", line);
      return Example{ordinal++, from_json(j)};
    }
    return std::nullopt;
  }

  // One CSV record (RFC 4180 quoting; quoted fields may span lines).
  // Returns false at end of input.
  bool csv_record(std::vector<std::string>& fields, std::size_t& start_line) {
    fields.clear();
    std::string text;
    if (!read_line(text)) return false;
    start_line = line;
    std::string cur;
    bool quoted = false, in_quotes = false;
    std::size_t i = 0;
    for (;;) {
      if (i == text.size()) {
        if (in_quotes) {
          if (!read_line(text)) throw ParseError("unterminated quoted field", start_line);
          cur += '\n';
          i = 0;
          continue;
        }
        fields.push_back(std::move(cur));
        return true;
      }
      const char c = text[i++];
      if (in_quotes) {
        if (c == '"') {
          if (i < text.size() && text[i] == '"') {
            cur += '"';
            ++i;
          } else {
            in_quotes = false;
          }
        } else {
          cur += c;
        }
      } else if (c == ',') {
        fields.push_back(std::move(cur));
        cur.clear();
        quoted = false;
      } else if (c == '"') {
        if (quoted || !cur.empty()) throw ParseError("unexpected quote", line);
        quoted = in_quotes = true;
      } else {
        if (quoted) throw ParseError("text after closing quote", line);
        cur += c;
      }
    }
  }

  std::optional<Example> next_csv() {
    std::vector<std::string> fields;
    std::size_t at = 0;
    if (header.empty()) {
      if (!csv_record(fields, at)) return std::nullopt;
      std::set<std::string> seen;
      for (const auto& h : fields)
        if (!seen.insert(h).second) throw DuplicateKey(h, at);
      header = std::move(fields);
    }
    for (;;) {
      if (!csv_record(fields, at)) return std::nullopt;
      if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
      if (fields.size() != header.size())
        throw ParseError("expected " + std::to_string(header.size()) + " columns, got " +
                             std::to_string(fields.size()),
                         at);
      Value::Record r;
      for (std::size_t k = 0; k < header.size(); ++k) r.emplace(header[k], std::move(fields[k]));
      return Example{ordinal++, Value(std::move(r))};
    }
  }
};

ExampleReader::ExampleReader(const std::string& path, FileFormat format)
    : impl_(std::make_unique<Impl>()) {
  impl_->format = format;
  impl_->in.open(path, std::ios::binary);
  if (!impl_->in) throw IoError("cannot open '" + path + "'");
}

ExampleReader::ExampleReader(const DatasetDescriptor& d, const std::string& split)
    : ExampleReader(split_info(d, split).path, split_info(d, split).format) {}

ExampleReader::~ExampleReader() = default;
ExampleReader::ExampleReader(ExampleReader&&) noexcept = default;
ExampleReader& ExampleReader::operator=(ExampleReader&&) noexcept = default;

std::optional<Example> ExampleReader::next() {
  auto ex = impl_->format == FileFormat::Csv ? impl_->next_csv() : impl_->next_jsonl();
  if (!ex && impl_->in.bad()) throw IoError("read failure");
  return ex;
}

std::vector<Example> read_examples(const std::string& path, FileFormat format) {
  ExampleReader r(path, format);
  std::vector<Example> out;
  while (auto ex = r.next()) out.push_back(std::move(*ex));
  return out;
}

std::vector<Example> ingest_split(const DatasetDescriptor& d, const std::string& split) {
  ExampleReader r(d, split);
  std::vector<Example> out;
  while (auto ex = r.next()) out.push_back(std::move(*ex));
  return out;
}

// ---------------------------------------------------------------------------

std::vector<DatasetDescriptor> registry_from_json(const nlohmann::json& j,
                                                  const std::string& base_dir) {
  const nlohmann::json& list = j.is_object() && j.contains("datasets") ? j.at("datasets") : j;
  if (!list.is_array()) throw ValidationError("registry must list datasets");
  std::vector<DatasetDescriptor> out;
  for (const auto& d : list) {
    try {
      DatasetDescriptor desc;
      desc.name = d.at("name").get<std::string>();
      if (d.contains("subset") && !d.at("subset").is_null())
        desc.subset = d.at("subset").get<std::string>();
      for (const auto& [split, info] : d.at("splits").items()) {
        SplitInfo si;
        si.path = info.at("path").get<std::string>();
        if (!base_dir.empty() && fs::path(si.path).is_relative())
          si.path = (fs::path(base_dir) / si.path).lexically_normal().string();
        si.format = parse_format(info.value("format", std::string("jsonl")));
        si.example_count = info.value("example_count", std::uint64_t{0});
        desc.splits.emplace(split, std::move(si));
      }
      out.push_back(std::move(desc));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("malformed registry entry: ") + e.what());
    }
  }
  return out;
}

std::vector<DatasetDescriptor> load_registry(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open registry '" + path + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return registry_from_json(parse_json_strict(text),
                            fs::absolute(path).parent_path().string());
}

nlohmann::json registry_to_json(const std::vector<DatasetDescriptor>& registry) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& d : registry) {
    nlohmann::json splits = nlohmann::json::object();
    for (const auto& [name, si] : d.splits)
      splits[name] = {{"path", si.path},
                      {"format", format_name(si.format)},
                      {"example_count", si.example_count}};
    nlohmann::json e = {{"name", d.name}, {"splits", splits}};
    if (d.subset) e["subset"] = *d.subset;
    list.push_back(std::move(e));
  }
  return {{"datasets", list}};
}

nlohmann::json RegistryReport::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& i : issues)
    list.push_back(
        {{"kind", i.kind}, {"dataset", i.dataset}, {"split", i.split}, {"detail", i.detail}});
  return {{"ok", ok()}, {"issues", list}};
}

RegistryReport validate_registry(const std::vector<DatasetDescriptor>& registry) {
  RegistryReport report;
  std::set<std::string> seen;
  for (const auto& d : registry) {
    const std::string key = d.ref().key();
    if (!seen.insert(key).second) report.issues.push_back({"duplicate", key, "", "duplicate name and subset"});
    for (const auto& [split, si] : d.splits) {
      if (!is_split_name(split)) {
        report.issues.push_back({"invalid_split", key, split, "split must be train, validation or test"});
        continue;
      }
      std::error_code ec;
      if (!fs::is_regular_file(si.path, ec)) {
        report.issues.push_back({"missing_file", key, split, si.path});
        continue;
      }
      try {
        ExampleReader r(si.path, si.format);
        std::uint64_t n = 0;
        while (r.next()) ++n;
        if (n != si.example_count)
          report.issues.push_back({"count_mismatch", key, split,
                                   "declared " + std::to_string(si.example_count) + ", found " +
                                       std::to_string(n)});
      } catch (const Error& e) {
        report.issues.push_back({"unreadable", key, split, e.what()});
      }
    }
  }
  return report;
}

const DatasetDescriptor* find_dataset(const std::vector<DatasetDescriptor>& registry,
                                      std::string_view key) {
  for (const auto& d : registry)
    if (d.ref().key() == key) return &d;
  return nullptr;
}

}  // namespace promptforge
