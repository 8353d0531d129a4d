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

#include "promptforge/mixture.hpp"

#include <algorithm>
#include <iterator>
#include <set>
#include <tuple>

#include "promptforge/errors.hpp"

namespace promptforge {

std::uint64_t effective_pair_size(std::uint64_t n_examples, std::uint64_t num_templates,
                                  std::uint64_t cap) {
  if (num_templates == 0) throw ValidationError("num_templates must be at least 1");
  return n_examples <= cap ? n_examples : cap / num_templates;
}

std::uint64_t dataset_total(const MixtureEntry& e, std::uint64_t cap) {
  return effective_pair_size(e.n_examples, e.templates.size(), cap) * e.templates.size();
}

double MixtureSpec::p_avg() const noexcept {
  if (entries.empty()) return 0.0;
  std::size_t n = 0;
  for (const auto& e : entries) n += e.templates.size();
  return static_cast<double>(n) / static_cast<double>(entries.size());
}

void MixtureSpec::validate() const {
  if (cap == 0) throw ValidationError("cap must be positive");
  if (entries.empty()) throw EmptyMixture("mixture has no entries");
  std::set<std::string> seen;
  std::uint64_t mass = 0;
  for (const auto& e : entries) {
    if (e.templates.empty())
      throw ValidationError("dataset '" + e.dataset + "' has no templates");
    if (!seen.insert(e.dataset).second)
      throw ValidationError("dataset '" + e.dataset + "' listed twice");
    mass += dataset_total(e, cap);
  }
  if (mass == 0) throw EmptyMixture("mixture has no examples to sample");
}

nlohmann::ordered_json MixtureSpec::to_json() const {
  nlohmann::ordered_json j;
  auto list = nlohmann::ordered_json::array();
  for (const auto& e : entries)
    list.push_back({{"dataset", e.dataset}, {"templates", e.templates}, {"n_examples", e.n_examples}});
  j["entries"] = list;
  j["cap"] = cap;
  j["seed"] = seed;
  return j;
}

MixtureSpec MixtureSpec::from_json(const nlohmann::json& j) {
  try {
    MixtureSpec s;
    for (const auto& e : j.at("entries"))
      s.entries.push_back({e.at("dataset").get<std::string>(),
                           e.at("templates").get<std::vector<std::string>>(),
                           e.at("n_examples").get<std::uint64_t>()});
    s.cap = j.value("cap", kDefaultCap);
    s.seed = j.value("seed", std::uint64_t{0});
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed mixture spec: ") + e.what());
  }
}

MixtureSampler::MixtureSampler(const MixtureSpec& spec) : rng_(derive_seed({spec.seed})) {
  spec.validate();
  for (const auto& e : spec.entries) {
    const std::uint64_t w = effective_pair_size(e.n_examples, e.templates.size(), spec.cap);
    for (const auto& t : e.templates) pairs_.push_back({e.dataset, t, e.n_examples, w});
  }
  index();
}

MixtureSampler::MixtureSampler(std::vector<Pair> pairs, std::uint64_t seed)
    : pairs_(std::move(pairs)), rng_(derive_seed({seed})) {
  index();
  if (total_ == 0) throw EmptyMixture("mixture has no sampling mass");
}

void MixtureSampler::index() {
  std::sort(pairs_.begin(), pairs_.end(), [](const Pair& a, const Pair& b) {
    return std::tie(a.dataset, a.template_id) < std::tie(b.dataset, b.template_id);
  });
  for (const auto& p : pairs_) {
    total_ += p.weight;
    cumulative_.push_back(total_);
  }
}

Draw MixtureSampler::next() {
  const std::uint64_t r = rng_.below(total_);
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
  const Pair& p = pairs_[static_cast<std::size_t>(it - cumulative_.begin())];
  return {p.dataset, p.template_id, rng_.below(p.n_examples)};
}

std::vector<Draw> sample_mixture(const MixtureSpec& spec, std::uint64_t total_draws) {
  MixtureSampler s(spec);
  std::vector<Draw> out;
  out.reserve(total_draws);
  for (std::uint64_t i = 0; i < total_draws; ++i) out.push_back(s.next());
  return out;
}

nlohmann::ordered_json draw_to_json(const Draw& d) {
  return {{"dataset", d.dataset}, {"template_id", d.template_id}, {"example_ordinal", d.example_ordinal}};
}

// ---------------------------------------------------------------------------

void PackingConfig::validate() const {
  if (max_input_tokens == 0 || max_target_tokens == 0)
    throw ValidationError("packing maxima must be positive");
}

std::string instance_ref(const PromptedInstance& p) {
  return p.dataset.key() + "/" + p.split + "/" + p.template_id + "/" +
         std::to_string(p.example_ordinal);
}

TruncatedInstance truncate_instance(const PromptedInstance& p, const PackingConfig& cfg) {
  TruncatedInstance t{cfg.tokenizer.tokenize(p.input), cfg.tokenizer.tokenize(p.target)};
  if (t.input.size() > cfg.max_input_tokens) t.input.resize(cfg.max_input_tokens);
  if (t.target.size() > cfg.max_target_tokens) t.target.resize(cfg.max_target_tokens);
  return t;
}

Packer::Packer(PackingConfig cfg, Sink sink) : cfg_(std::move(cfg)), sink_(std::move(sink)) {
  cfg_.validate();
}

void Packer::add(const PromptedInstance& p) { add(instance_ref(p), truncate_instance(p, cfg_)); }

void Packer::add(const std::string& ref, TruncatedInstance t) {
  const bool fits = open_.input_tokens.size() + t.input.size() <= cfg_.max_input_tokens &&
                    open_.target_tokens.size() + t.target.size() <= cfg_.max_target_tokens;
  if (!fits) finish();
  Segment seg;
  seg.instance_ref = ref;
  seg.instance_index = next_index_++;
  seg.input_range = {open_.input_tokens.size(), open_.input_tokens.size() + t.input.size()};
  seg.target_range = {open_.target_tokens.size(), open_.target_tokens.size() + t.target.size()};
  seg.segment_id = static_cast<std::uint32_t>(open_.segments.size() + 1);
  std::move(t.input.begin(), t.input.end(), std::back_inserter(open_.input_tokens));
  std::move(t.target.begin(), t.target.end(), std::back_inserter(open_.target_tokens));
  open_.segments.push_back(std::move(seg));
}

void Packer::finish() {
  if (open_.segments.empty()) return;
  sink_(std::move(open_));
  open_ = PackedSequence{};
}

std::vector<PackedSequence> truncate_and_pack(const std::vector<PromptedInstance>& instances,
                                              const PackingConfig& cfg) {
  std::vector<PackedSequence> out;
  Packer packer(cfg, [&](PackedSequence&& s) { out.push_back(std::move(s)); });
  for (const auto& p : instances) packer.add(p);
  packer.finish();
  return out;
}

nlohmann::ordered_json packed_to_json(const PackedSequence& s) {
  nlohmann::ordered_json j;
  j["input_tokens"] = s.input_tokens;
  j["target_tokens"] = s.target_tokens;
  auto segs = nlohmann::ordered_json::array();
  for (const auto& g : s.segments)
    segs.push_back({{"segment_id", g.segment_id},
                    {"instance_ref", g.instance_ref},
                    {"input_range", {g.input_range.begin, g.input_range.end}},
                    {"target_range", {g.target_range.begin, g.target_range.end}}});
  j["segments"] = segs;
  return j;
}

}  // namespace promptforge
