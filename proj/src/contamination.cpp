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

#include "promptforge/contamination.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "promptforge/errors.hpp"
#include "promptforge/template_lang.hpp"
#include "promptforge/value.hpp"

namespace promptforge {

std::uint32_t Vocabulary::intern(const std::string& token) {
  auto [it, inserted] = ids_.try_emplace(token, static_cast<std::uint32_t>(tokens_.size()));
  if (inserted) {
    if (tokens_.size() >= kSeparatorBase) throw ValidationError("vocabulary too large");
    tokens_.push_back(token);
  }
  return it->second;
}

std::optional<std::uint32_t> Vocabulary::find(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::uint32_t> build_suffix_array(const std::vector<std::uint32_t>& s) {
  const std::size_t n = s.size();
  if (n == 0) return {};
  if (n > std::numeric_limits<std::uint32_t>::max())
    throw ValidationError("corpus too large for 32-bit suffix array");

  // Dense initial ranks preserving the order of the token ids.
  std::vector<std::uint32_t> values(s);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::vector<std::uint32_t> rank(n), next_rank(n), sa(n), tmp(n);
  for (std::size_t i = 0; i < n; ++i)
    rank[i] = static_cast<std::uint32_t>(
        std::lower_bound(values.begin(), values.end(), s[i]) - values.begin());
  std::size_t classes = values.size();

  std::vector<std::uint32_t> count;
  // Counting sort of positions by key(i), stable with respect to `in`.
  auto counting_sort = [&](const std::vector<std::uint32_t>& in, std::vector<std::uint32_t>& out,
                           auto key, std::size_t range) {
    count.assign(range + 1, 0);
    for (auto i : in) ++count[key(i) + 1];
    for (std::size_t r = 1; r <= range; ++r) count[r] += count[r - 1];
    for (auto i : in) out[count[key(i)]++] = i;
  };

  for (std::size_t i = 0; i < n; ++i) tmp[i] = static_cast<std::uint32_t>(i);
  counting_sort(tmp, sa, [&](std::uint32_t i) { return rank[i]; }, classes);

  for (std::size_t k = 1; classes < n; k <<= 1) {
    // Second key: rank of the suffix k positions later, 0 past the end.
    auto second = [&](std::uint32_t i) -> std::uint32_t {
      return i + k < n ? rank[i + k] + 1 : 0;
    };
    counting_sort(sa, tmp, second, classes + 1);
    counting_sort(tmp, sa, [&](std::uint32_t i) { return rank[i]; }, classes);
    next_rank[sa[0]] = 0;
    std::uint32_t c = 0;
    for (std::size_t j = 1; j < n; ++j) {
      const auto a = sa[j - 1], b = sa[j];
      if (rank[a] != rank[b] || second(a) != second(b)) ++c;
      next_rank[b] = c;
    }
    rank.swap(next_rank);
    classes = static_cast<std::size_t>(c) + 1;
    if (k >= n) break;
  }
  return sa;
}

CorpusIndex build_index(const std::vector<std::string>& documents, Tokenizer tokenizer) {
  if (documents.empty()) throw EmptyCorpus("corpus has no documents");
  CorpusIndex idx;
  idx.tokenizer = tokenizer;
  for (std::size_t d = 0; d < documents.size(); ++d) {
    if (d > 0) {
      if (d - 1 >= std::numeric_limits<std::uint32_t>::max() - kSeparatorBase)
        throw ValidationError("too many documents");
      idx.tokens.push_back(kSeparatorBase + static_cast<std::uint32_t>(d - 1));
    }
    idx.doc_boundaries.push_back(idx.tokens.size());
    for (const auto& tok : tokenizer.tokenize(documents[d]))
      idx.tokens.push_back(idx.vocabulary.intern(tok));
  }
  if (idx.vocabulary.size() == 0) throw EmptyCorpus("corpus has no tokens");
  idx.suffix_array = build_suffix_array(idx.tokens);
  return idx;
}

CorpusIndex build_index_from_file(const std::string& path, Tokenizer tokenizer) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  const bool jsonl = path.size() >= 6 && path.compare(path.size() - 6, 6, ".jsonl") == 0;
  std::vector<std::string> docs;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!jsonl) {
      docs.push_back(line);
      continue;
    }
    if (tmpl::trim_ascii(line).empty()) continue;
    const auto j = parse_json_strict(line, n);
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string())
      throw ParseError("expected an object with a \"text\" string", n);
    docs.push_back(j["text"].get<std::string>());
  }
  if (in.bad()) throw IoError("read failure on '" + path + "'");
  return build_index(docs, tokenizer);
}

namespace {

// <0 when the suffix at pos sorts before q, 0 when q is a prefix of it.
int compare_suffix(const std::vector<std::uint32_t>& t, std::size_t pos,
                   const std::vector<std::uint32_t>& q) {
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (pos + k >= t.size()) return -1;
    if (t[pos + k] != q[k]) return t[pos + k] < q[k] ? -1 : 1;
  }
  return 0;
}

std::uint64_t count_ids(const CorpusIndex& index, const std::vector<std::uint32_t>& q) {
  const auto& sa = index.suffix_array;
  auto lo = std::partition_point(sa.begin(), sa.end(), [&](std::uint32_t p) {
    return compare_suffix(index.tokens, p, q) < 0;
  });
  auto hi = std::partition_point(lo, sa.end(), [&](std::uint32_t p) {
    return compare_suffix(index.tokens, p, q) == 0;
  });
  return static_cast<std::uint64_t>(hi - lo);
}

bool to_ids(const CorpusIndex& index, const std::vector<std::string>& ngram,
            std::size_t begin, std::size_t end, std::vector<std::uint32_t>& out) {
  out.clear();
  for (std::size_t i = begin; i < end; ++i) {
    auto id = index.vocabulary.find(ngram[i]);
    if (!id) return false;
    out.push_back(*id);
  }
  return true;
}

}  // namespace

std::uint64_t count_ngram(const CorpusIndex& index, const std::vector<std::string>& ngram) {
  if (ngram.empty()) throw ValidationError("n-gram must not be empty");
  std::vector<std::uint32_t> q;
  if (!to_ids(index, ngram, 0, ngram.size(), q)) return 0;
  return count_ids(index, q);
}

std::uint64_t count_ngram(const CorpusIndex& index, const std::string& text) {
  return count_ngram(index, index.tokenizer.tokenize(text));
}

ScanReport scan_examples(const CorpusIndex& index, const std::vector<ScanExample>& examples,
                         std::size_t group) {
  if (group == 0) throw ValidationError("group size must be at least 1");
  ScanReport report;
  report.group = group;
  std::vector<std::uint32_t> q;
  for (std::size_t e = 0; e < examples.size(); ++e) {
    ExampleScan es;
    es.index = e;
    es.id = examples[e].id.empty() ? std::to_string(e) : examples[e].id;
    for (const auto& f : examples[e].fields) {
      const auto toks = index.tokenizer.tokenize(f.text);
      FieldScan fs;
      fs.field = f.name;
      fs.tokens = toks.size();
      fs.groups = toks.size() / group;
      fs.dropped = toks.size() % group;
      for (std::size_t g = 0; g < fs.groups; ++g) {
        if (to_ids(index, toks, g * group, (g + 1) * group, q) && count_ids(index, q) > 0)
          ++fs.matched_groups;
      }
      fs.flagged = fs.matched_groups > 0;
      auto& pf = report.per_field[f.name];
      ++pf.total;
      if (fs.flagged) ++pf.matched;
      es.flagged = es.flagged || fs.flagged;
      es.fields.push_back(std::move(fs));
    }
    ++report.overall.total;
    if (es.flagged) {
      ++report.overall.matched;
      report.flagged.push_back(e);
    }
    report.examples.push_back(std::move(es));
  }
  return report;
}

nlohmann::ordered_json ScanReport::to_json() const {
  nlohmann::ordered_json j;
  j["group"] = group;
  j["matches"] = overall.str();
  j["matched"] = overall.matched;
  j["total"] = overall.total;
  auto fields = nlohmann::ordered_json::object();
  for (const auto& [name, mc] : per_field)
    fields[name] = {{"matched", mc.matched}, {"total", mc.total}, {"matches", mc.str()}};
  j["per_field"] = fields;
  auto flagged_list = nlohmann::ordered_json::array();
  for (auto i : flagged) {
    const auto& es = examples[i];
    nlohmann::ordered_json e;
    e["index"] = es.index;
    e["id"] = es.id;
    auto fl = nlohmann::ordered_json::array();
    for (const auto& f : es.fields)
      fl.push_back({{"field", f.field},
                    {"tokens", f.tokens},
                    {"groups", f.groups},
                    {"dropped", f.dropped},
                    {"matched_groups", f.matched_groups},
                    {"flagged", f.flagged}});
    e["fields"] = fl;
    flagged_list.push_back(std::move(e));
  }
  j["flagged"] = flagged_list;
  return j;
}

std::string ScanReport::table(const std::string& task) const {
  std::vector<std::pair<std::string, std::string>> cols;
  const std::string prefix = task.empty() ? "" : task + " ";
  if (per_field.size() > 1)
    for (const auto& [name, mc] : per_field) cols.emplace_back(prefix + name, mc.str());
  cols.emplace_back(task.empty() ? "All" : task, overall.str());

  std::ostringstream row1, row2;
  row1 << std::left << std::setw(8) << "Task";
  row2 << std::left << std::setw(8) << "Matches";
  for (const auto& [head, value] : cols) {
    const int w = static_cast<int>(std::max(head.size(), value.size())) + 2;
    row1 << std::setw(w) << head;
    row2 << std::setw(w) << value;
  }
  auto trim_right = [](std::string s) {
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s;
  };
  return trim_right(row1.str()) + "\n" + trim_right(row2.str()) + "\n";
}

}  // namespace promptforge
