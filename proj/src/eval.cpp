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

#include "promptforge/eval.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <semaphore>
#include <thread>

#include <httplib.h>

#include "promptforge/errors.hpp"
#include "promptforge/mixture.hpp"

namespace promptforge {

std::vector<double> Scorer::score_batch(const std::vector<ScorePair>& pairs) const {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& [input, cont] : pairs) out.push_back(log_likelihood(input, cont));
  return out;
}

void MockTableScorer::set(std::string input, std::string continuation, double score) {
  table_[{std::move(input), std::move(continuation)}] = score;
}

double MockTableScorer::log_likelihood(const std::string& input,
                                       const std::string& continuation) const {
  auto it = table_.find({input, continuation});
  if (it == table_.end()) throw ScorerFailure("no score for continuation '" + continuation + "'");
  return it->second;
}

// ---------------------------------------------------------------------------

UnigramScorer::UnigramScorer(std::map<std::string, std::uint64_t> counts, Tokenizer tokenizer,
                             double alpha)
    : counts_(counts.begin(), counts.end()), tokenizer_(tokenizer), alpha_(alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ValidationError("alpha must be >= 0");
  double total = 0.0;
  for (const auto& [tok, c] : counts_) total += static_cast<double>(c);
  const double denom = total + alpha_ * static_cast<double>(counts_.size() + 1);
  if (denom <= 0.0) throw ValidationError("unigram table is empty");
  log_denominator_ = std::log(denom);
}

UnigramScorer UnigramScorer::from_texts(const std::vector<std::string>& texts, Tokenizer tokenizer,
                                        double alpha) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& t : texts)
    for (auto& tok : tokenizer.tokenize(t)) ++counts[std::move(tok)];
  return UnigramScorer(std::move(counts), tokenizer, alpha);
}

UnigramScorer UnigramScorer::from_file(const std::string& path, Tokenizer tokenizer, double alpha) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto j = parse_json_strict(text);
  if (!j.is_object()) throw ValidationError("frequency table must be a JSON object");
  std::map<std::string, std::uint64_t> counts;
  for (const auto& [tok, c] : j.items()) {
    if (!c.is_number_unsigned() && !(c.is_number_integer() && c.get<std::int64_t>() >= 0))
      throw ValidationError("count for '" + tok + "' must be a non-negative integer");
    counts[tok] = c.get<std::uint64_t>();
  }
  return UnigramScorer(std::move(counts), tokenizer, alpha);
}

double UnigramScorer::token_log_prob(const std::string& token) const {
  auto it = counts_.find(token);
  const double c = it == counts_.end() ? 0.0 : static_cast<double>(it->second);
  const double num = c + alpha_;
  if (num <= 0.0) throw ScorerFailure("token '" + token + "' has zero probability");
  return std::log(num) - log_denominator_;
}

double UnigramScorer::log_likelihood(const std::string& /*input*/,
                                     const std::string& continuation) const {
  double sum = 0.0;
  for (const auto& tok : tokenizer_.tokenize(continuation)) sum += token_log_prob(tok);
  return sum;
}

// ---------------------------------------------------------------------------

std::size_t rank_classify(const PromptedInstance& instance, const Scorer& scorer) {
  if (!instance.answer_choices || instance.answer_choices->empty())
    throw ValidationError("instance " + instance_ref(instance) + " has no answer choices");
  std::vector<ScorePair> pairs;
  for (const auto& c : *instance.answer_choices) pairs.emplace_back(instance.input, c);
  std::vector<double> scores;
  try {
    scores = scorer.score_batch(pairs);
  } catch (const Timeout& e) {
    throw Timeout(instance_ref(instance) + ": " + e.what());
  } catch (const ProtocolError& e) {
    throw ProtocolError(instance_ref(instance) + ": " + e.what());
  } catch (const ScorerFailure& e) {
    throw ScorerFailure(instance_ref(instance) + ": " + e.what());
  }
  if (scores.size() != pairs.size())
    throw ScorerFailure(instance_ref(instance) + ": scorer returned the wrong number of scores");
  std::size_t best = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i]))
      throw ScorerFailure(instance_ref(instance) + ": non-finite score");
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

EvalTask EvalTask::from_instances(const Template& t, std::vector<PromptedInstance> instances) {
  if (!t.original_task)
    throw ValidationError("template '" + t.name + "' is not an original-task prompt");
  EvalTask task;
  task.dataset = t.dataset;
  task.template_id = t.id;
  for (auto& p : instances) {
    if (p.template_id != t.id) continue;
    if (!p.answer_choices)
      throw ValidationError("instance " + instance_ref(p) + " has no answer choices");
    auto it = std::find(p.answer_choices->begin(), p.answer_choices->end(), p.target);
    if (it == p.answer_choices->end())
      throw ValidationError("instance " + instance_ref(p) + " target is not a choice");
    task.gold.push_back(static_cast<std::size_t>(it - p.answer_choices->begin()));
    if (task.split.empty()) task.split = p.split;
    task.instances.push_back(std::move(p));
  }
  return task;
}

double evaluate_task(const EvalTask& task, const Scorer& scorer, unsigned workers) {
  if (task.instances.empty()) throw EmptyTask("task '" + task.template_id + "' has no instances");
  if (task.gold.size() != task.instances.size())
    throw ValidationError("gold labels do not match instances");
  const std::size_t n = task.instances.size();
  std::vector<char> correct(n, 0);
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers)
            correct[i] = rank_classify(task.instances[i], scorer) == task.gold[i];
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::size_t hits = 0;
  for (char c : correct) hits += c ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw EmptyInput("no values");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

EvalAggregate aggregate(const std::vector<double>& accuracies) {
  if (accuracies.empty()) throw EmptyInput("aggregate needs at least one accuracy");
  std::vector<double> v = accuracies;
  std::sort(v.begin(), v.end());
  EvalAggregate a;
  a.q1 = quantile_sorted(v, 0.25);
  a.median = quantile_sorted(v, 0.5);
  a.q3 = quantile_sorted(v, 0.75);
  a.iqr = a.q3 - a.q1;
  return a;
}

EvalAggregate aggregate(const std::map<std::string, double>& per_prompt) {
  std::vector<double> v;
  for (const auto& [id, acc] : per_prompt) v.push_back(acc);
  EvalAggregate a = aggregate(v);
  a.per_prompt_accuracy = per_prompt;
  return a;
}

nlohmann::ordered_json eval_report_json(const std::string& dataset, const EvalAggregate& a) {
  nlohmann::ordered_json j;
  j["dataset"] = dataset;
  j["per_prompt"] = nlohmann::ordered_json::object();
  for (const auto& [id, acc] : a.per_prompt_accuracy) j["per_prompt"][id] = acc;
  j["median"] = a.median;
  j["q1"] = a.q1;
  j["q3"] = a.q3;
  j["iqr"] = a.iqr;
  return j;
}

// ---------------------------------------------------------------------------
// Remote scorer

namespace {

// Rewrites bare NaN / Infinity tokens (which some servers emit) to null so
// the document parses; null scores are then rejected as non-finite.
std::string neutralize_nonfinite(const std::string& body) {
  std::string out;
  out.reserve(body.size());
  bool in_string = false;
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (in_string) {
      out += c;
      if (c == '\\' && i + 1 < body.size()) out += body[++i];
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') {
      in_string = true;
      out += c;
      continue;
    }
    auto match = [&](std::string_view word) { return body.compare(i, word.size(), word) == 0; };
    if (match("-Infinity")) {
      out += "null";
      i += 8;
    } else if (match("Infinity")) {
      out += "null";
      i += 7;
    } else if (match("NaN")) {
      out += "null";
      i += 2;
    } else {
      out += c;
    }
  }
  return out;
}

}  // namespace

struct RemoteScorer::Impl {
  RemoteScorerConfig cfg;
  std::string origin;  // scheme://host:port
  std::string path;
  mutable std::counting_semaphore<> in_flight;

  explicit Impl(RemoteScorerConfig c)
      : cfg(std::move(c)), in_flight(static_cast<std::ptrdiff_t>(std::max(1u, cfg.max_in_flight))) {
    const auto scheme = cfg.endpoint.find("://");
    const auto slash = cfg.endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    origin = cfg.endpoint.substr(0, slash);
    path = slash == std::string::npos ? "/score" : cfg.endpoint.substr(slash);
    if (origin.empty()) throw ValidationError("remote scorer endpoint is empty");
  }

  std::vector<double> post(const std::vector<ScorePair>& pairs) const {
    nlohmann::json body;
    body["pairs"] = nlohmann::json::array();
    for (const auto& [input, cont] : pairs)
      body["pairs"].push_back({{"input", input}, {"continuation", cont}});
    const std::string payload = body.dump();

    in_flight.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{in_flight};

    std::string last_error;
    bool timed_out = false;
    for (unsigned attempt = 0; attempt <= cfg.max_retries; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(cfg.retry_backoff * attempt);
      httplib::Client client(origin);
      client.set_connection_timeout(cfg.timeout);
      client.set_read_timeout(cfg.timeout);
      client.set_write_timeout(cfg.timeout);
      auto res = client.Post(path, payload, "application/json");
      if (!res) {
        const auto err = res.error();
        timed_out = err == httplib::Error::Read || err == httplib::Error::Write ||
                    err == httplib::Error::ConnectionTimeout;
        last_error = httplib::to_string(err);
        continue;
      }
      if (res->status >= 500) {
        timed_out = false;
        last_error = "server returned " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200)
        throw ProtocolError("server returned " + std::to_string(res->status));
      return decode(res->body, pairs.size());
    }
    if (timed_out) throw Timeout("scorer request timed out: " + last_error);
    throw ScorerFailure("scorer request failed: " + last_error);
  }

  static std::vector<double> decode(const std::string& text, std::size_t expected) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(neutralize_nonfinite(text));
    } catch (const nlohmann::json::parse_error& e) {
      throw ProtocolError(std::string("malformed scorer response: ") + e.what());
    }
    if (!j.is_object() || !j.contains("log_likelihoods") || !j["log_likelihoods"].is_array())
      throw ProtocolError("scorer response lacks log_likelihoods");
    const auto& arr = j["log_likelihoods"];
    if (arr.size() != expected)
      throw ProtocolError("expected " + std::to_string(expected) + " scores, got " +
                          std::to_string(arr.size()));
    std::vector<double> out;
    for (const auto& v : arr) {
      if (v.is_null()) throw ScorerFailure("non-finite score in response");
      if (!v.is_number()) throw ProtocolError("score is not a number");
      const double d = v.get<double>();
      if (!std::isfinite(d)) throw ScorerFailure("non-finite score in response");
      out.push_back(d);
    }
    return out;
  }
};

RemoteScorer::RemoteScorer(RemoteScorerConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}
RemoteScorer::~RemoteScorer() = default;

double RemoteScorer::log_likelihood(const std::string& input, const std::string& continuation) const {
  return impl_->post({{input, continuation}}).at(0);
}

std::vector<double> RemoteScorer::score_batch(const std::vector<ScorePair>& pairs) const {
  if (pairs.empty()) return {};
  return impl_->post(pairs);
}

std::vector<double> remote_score(const RemoteScorerConfig& cfg, const std::vector<ScorePair>& pairs) {
  return RemoteScorer(cfg).score_batch(pairs);
}

}  // namespace promptforge
