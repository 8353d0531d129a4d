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

#include "promptforge/hashing.hpp"
#include "promptforge/materializer.hpp"
#include "promptforge/tokenizer.hpp"

namespace promptforge {

inline constexpr std::uint64_t kDefaultCap = 500'000;

/// Sampling size of one (dataset, template) pair: n_examples when it is at
/// most cap, else floor(cap / num_templates).
std::uint64_t effective_pair_size(std::uint64_t n_examples, std::uint64_t num_templates,
                                  std::uint64_t cap = kDefaultCap);

struct MixtureEntry {
  std::string dataset;
  std::vector<std::string> templates;  // template ids
  std::uint64_t n_examples = 0;
};

struct MixtureSpec {
  std::vector<MixtureEntry> entries;
  std::uint64_t cap = kDefaultCap;
  std::uint64_t seed = 0;

  std::size_t d() const noexcept { return entries.size(); }
  /// Average templates per dataset; 0 for an empty spec.
  double p_avg() const noexcept;

  /// Throws ValidationError (cap 0, entry without templates, repeated
  /// dataset) or EmptyMixture (no entries, or no sampling mass).
  void validate() const;

  nlohmann::ordered_json to_json() const;
  static MixtureSpec from_json(const nlohmann::json& j);
};

/// Summed effective size of all pairs of one entry.
std::uint64_t dataset_total(const MixtureEntry& e, std::uint64_t cap);

struct Draw {
  std::string dataset;
  std::string template_id;
  std::uint64_t example_ordinal = 0;
  friend bool operator==(const Draw&, const Draw&) = default;
  friend auto operator<=>(const Draw&, const Draw&) = default;
};

/// I.i.d. draws from the categorical over (dataset, template) pairs weighted
/// by effective_pair_size, then a uniform ordinal over the dataset's
/// n_examples. Pairs are ordered canonically, so entry order is irrelevant.
class MixtureSampler {
 public:
  struct Pair {
    std::string dataset;
    std::string template_id;
    std::uint64_t n_examples;
    std::uint64_t weight;
  };

  explicit MixtureSampler(const MixtureSpec& spec);
  /// Samples explicit weighted pairs; throws EmptyMixture when the total
  /// weight is zero.
  MixtureSampler(std::vector<Pair> pairs, std::uint64_t seed);

  Draw next();

  const std::vector<Pair>& pairs() const noexcept { return pairs_; }
  std::uint64_t total_weight() const noexcept { return total_; }

 private:
  void index();

  std::vector<Pair> pairs_;
  std::vector<std::uint64_t> cumulative_;
  std::uint64_t total_ = 0;
  Rng rng_;
};

std::vector<Draw> sample_mixture(const MixtureSpec& spec, std::uint64_t total_draws);

nlohmann::ordered_json draw_to_json(const Draw& d);

// ---------------------------------------------------------------------------
// Packing

struct PackingConfig {
  std::size_t max_input_tokens = 1024;
  std::size_t max_target_tokens = 256;
  Tokenizer tokenizer;

  void validate() const;  // throws ValidationError when a maximum is 0
};

struct TokenRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const TokenRange&, const TokenRange&) = default;
};

struct Segment {
  std::string instance_ref;
  std::uint64_t instance_index = 0;  // position in the input stream
  TokenRange input_range;
  TokenRange target_range;
  std::uint32_t segment_id = 0;  // 1-based within the sequence
};

struct PackedSequence {
  std::vector<std::string> input_tokens;
  std::vector<std::string> target_tokens;
  std::vector<Segment> segments;
};

/// "<dataset key>/<split>/<template_id>/<ordinal>".
std::string instance_ref(const PromptedInstance& p);

struct TruncatedInstance {
  std::vector<std::string> input;
  std::vector<std::string> target;
};

/// Tokenizes and keeps the prefix of input and target within the maxima.
TruncatedInstance truncate_instance(const PromptedInstance& p, const PackingConfig& cfg);

/// Greedy in-order packing: an instance joins the open sequence iff both of
/// its truncated parts fit; otherwise the open sequence is emitted first.
class Packer {
 public:
  using Sink = std::function<void(PackedSequence&&)>;

  Packer(PackingConfig cfg, Sink sink);

  void add(const PromptedInstance& p);
  void add(const std::string& ref, TruncatedInstance t);
  void finish();

 private:
  PackingConfig cfg_;
  Sink sink_;
  PackedSequence open_;
  std::uint64_t next_index_ = 0;
};

std::vector<PackedSequence> truncate_and_pack(const std::vector<PromptedInstance>& instances,
                                              const PackingConfig& cfg);

nlohmann::ordered_json packed_to_json(const PackedSequence& s);

}  // namespace promptforge
