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

#include <chrono>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptforge/materializer.hpp"
#include "promptforge/tokenizer.hpp"

namespace promptforge {

using ScorePair = std::pair<std::string, std::string>;  // (input, continuation)

/// Natural-log likelihood of a continuation given an input. Implementations
/// must be safe to call concurrently.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double log_likelihood(const std::string& input,
                                const std::string& continuation) const = 0;
  /// Scores all pairs in order. The default calls log_likelihood per pair.
  virtual std::vector<double> score_batch(const std::vector<ScorePair>& pairs) const;
};

/// Looks scores up in an explicit table; a missing pair is a ScorerFailure.
class MockTableScorer : public Scorer {
 public:
  MockTableScorer() = default;
  explicit MockTableScorer(std::map<ScorePair, double> table) : table_(std::move(table)) {}

  void set(std::string input, std::string continuation, double score);
  double log_likelihood(const std::string& input, const std::string& continuation) const override;

 private:
  std::map<ScorePair, double> table_;
};

/// Additive unigram model over a token frequency table, ignoring the input:
/// log p(c) = sum over tokens t of log((count(t) + alpha) / (N + alpha * (V + 1))),
/// where N is the total count and V the vocabulary size.
class UnigramScorer : public Scorer {
 public:
  UnigramScorer(std::map<std::string, std::uint64_t> counts, Tokenizer tokenizer = {},
                double alpha = 1.0);

  static UnigramScorer from_texts(const std::vector<std::string>& texts,
                                  Tokenizer tokenizer = {}, double alpha = 1.0);
  /// Reads a JSON object {token: count}. Throws IoError / ValidationError.
  static UnigramScorer from_file(const std::string& path, Tokenizer tokenizer = {},
                                 double alpha = 1.0);

  double token_log_prob(const std::string& token) const;
  double log_likelihood(const std::string& input, const std::string& continuation) const override;

 private:
  std::map<std::string, std::uint64_t, std::less<>> counts_;
  Tokenizer tokenizer_;
  double alpha_;
  double log_denominator_;
};

/// Index of the option with the highest raw log-likelihood; ties go to the
/// lowest index. Throws ScorerFailure naming the instance.
std::size_t rank_classify(const PromptedInstance& instance, const Scorer& scorer);

struct EvalTask {
  DatasetRef dataset;
  std::string split;
  std::string template_id;
  std::vector<PromptedInstance> instances;
  std::vector<std::size_t> gold;

  /// Gold is the position of each target within its answer choices.
  /// Throws ValidationError for non-original-task templates, missing
  /// choices, or targets outside the choices.
  static EvalTask from_instances(const Template& t, std::vector<PromptedInstance> instances);
};

/// Fraction of instances whose prediction equals gold. Throws EmptyTask.
double evaluate_task(const EvalTask& task, const Scorer& scorer, unsigned workers = 1);

struct EvalAggregate {
  std::map<std::string, double> per_prompt_accuracy;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
};

/// Quantile of sorted values, linear interpolation at q * (n - 1).
double quantile_sorted(const std::vector<double>& sorted, double q);

/// Throws EmptyInput.
EvalAggregate aggregate(const std::vector<double>& accuracies);
EvalAggregate aggregate(const std::map<std::string, double>& per_prompt);

/// {dataset, per_prompt, median, q1, q3, iqr}
nlohmann::ordered_json eval_report_json(const std::string& dataset, const EvalAggregate& a);

struct RemoteScorerConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8080/score
  std::chrono::milliseconds timeout{5000};
  unsigned max_retries = 3;
  std::chrono::milliseconds retry_backoff{50};
  unsigned max_in_flight = 4;
};

/// Client for POST {pairs: [{input, continuation}]} -> {log_likelihoods: [...]}.
/// Retries on connection failures and 5xx replies. Throws Timeout,
/// ProtocolError, or ScorerFailure (non-finite score).
class RemoteScorer : public Scorer {
 public:
  explicit RemoteScorer(RemoteScorerConfig cfg);
  ~RemoteScorer() override;

  double log_likelihood(const std::string& input, const std::string& continuation) const override;
  std::vector<double> score_batch(const std::vector<ScorePair>& pairs) const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::vector<double> remote_score(const RemoteScorerConfig& cfg, const std::vector<ScorePair>& pairs);

}  // namespace promptforge
