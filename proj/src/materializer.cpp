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

#include "promptforge/materializer.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <thread>

#include "promptforge/errors.hpp"
#include "promptforge/hashing.hpp"

namespace promptforge {

namespace {

std::uint64_t hash_part(std::uint64_t h, std::string_view s) {
  h = fnv1a64(std::to_string(s.size()) + ":", h);
  return fnv1a64(s, h);
}

std::optional<std::string> optional_string(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

nlohmann::ordered_json spans_to_json(const std::vector<tmpl::Span>& spans) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& s : spans)
    out.push_back({{"start", s.start}, {"end", s.end}, {"origin", tmpl::origin_name(s.origin)}});
  return out;
}

std::vector<tmpl::Span> spans_from_json(const nlohmann::json& j) {
  std::vector<tmpl::Span> out;
  for (const auto& s : j) {
    const auto origin = s.at("origin").get<std::string>();
    if (origin != "literal" && origin != "substitution")
      throw ValidationError("unknown span origin '" + origin + "'");
    out.push_back({s.at("start").get<std::size_t>(), s.at("end").get<std::size_t>(),
                   origin == "literal" ? tmpl::SpanOrigin::Literal
                                       : tmpl::SpanOrigin::Substitution});
  }
  return out;
}

void record_failure(SkipStats& stats, std::uint64_t ordinal, const Error& e) {
  ++stats.errors;
  if (stats.failures.size() < SkipStats::kMaxFailures)
    stats.failures.push_back({ordinal, e.kind(), e.what()});
}

}  // namespace

std::string template_id(std::string_view source,
                        const std::optional<std::string>& answer_choices_source,
                        std::string_view name) {
  std::uint64_t h = hash_part(fnv1a64(""), source);
  h = answer_choices_source ? hash_part(fnv1a64("+", h), *answer_choices_source)
                            : fnv1a64("-", h);
  h = hash_part(h, name);
  return to_hex16(h);
}

const std::string& assign_id(Template& t) {
  t.id = template_id(t.source, t.answer_choices_source, t.name);
  return t.id;
}

nlohmann::ordered_json template_to_json(const Template& t) {
  nlohmann::ordered_json j;
  j["id"] = t.id;
  j["name"] = t.name;
  j["dataset"] = {{"name", t.dataset.name}, {"subset", nullptr}};
  if (t.dataset.subset) j["dataset"]["subset"] = *t.dataset.subset;
  j["source"] = t.source;
  j["answer_choices"] = t.answer_choices_source ? nlohmann::ordered_json(*t.answer_choices_source)
                                                : nlohmann::ordered_json(nullptr);
  j["original_task"] = t.original_task;
  j["choices_in_prompt"] = t.choices_in_prompt;
  j["metrics"] = t.metrics;
  j["reference"] = t.reference;
  return j;
}

Template template_from_json(const nlohmann::json& j) {
  try {
    Template t;
    t.name = j.at("name").get<std::string>();
    if (auto it = j.find("dataset"); it != j.end()) {
      if (it->is_string()) {
        t.dataset.name = it->get<std::string>();
      } else {
        t.dataset.name = it->at("name").get<std::string>();
        t.dataset.subset = optional_string(*it, "subset");
      }
    }
    t.source = j.at("source").get<std::string>();
    t.answer_choices_source = optional_string(j, "answer_choices");
    t.original_task = j.value("original_task", true);
    t.choices_in_prompt = j.value("choices_in_prompt", false);
    t.metrics = j.value("metrics", std::vector<std::string>{});
    t.reference = j.value("reference", std::string());
    if (auto id = optional_string(j, "id"); id && !id->empty()) t.id = *id;
    else assign_id(t);
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed template record: ") + e.what());
  }
}

CompiledTemplate CompiledTemplate::compile(Template t) {
  CompiledTemplate c;
  c.ast = tmpl::parse(t.source, tmpl::SourceKind::FullPrompt);
  if (t.answer_choices_source)
    c.choices_ast = tmpl::parse(*t.answer_choices_source, tmpl::SourceKind::Fragment);
  if (t.id.empty()) assign_id(t);
  c.meta = std::move(t);
  return c;
}

std::uint64_t example_seed(std::uint64_t seed, std::uint64_t ordinal) noexcept {
  return derive_seed({seed, ordinal});
}

std::optional<std::vector<std::string>> render_answer_choices(const CompiledTemplate& t,
                                                              const Example& ex,
                                                              std::uint64_t seed) {
  if (!t.choices_ast) return std::nullopt;
  tmpl::RenderContext ctx;
  ctx.example = ex.fields;
  ctx.example_ordinal = ex.ordinal;
  ctx.rng_seed = seed;
  const std::string text = tmpl::render_fragment(*t.choices_ast, ctx).text;

  std::vector<std::string> options;
  bool any = false;
  std::size_t at = 0;
  for (;;) {
    const std::size_t sep = text.find("|||", at);
    const auto piece = tmpl::trim_ascii(std::string_view(text).substr(
        at, sep == std::string::npos ? std::string::npos : sep - at));
    any = any || !piece.empty();
    options.emplace_back(piece);
    if (sep == std::string::npos) break;
    at = sep + 3;
  }
  if (!any) throw EmptyChoices("answer choices render to no options");
  return options;
}

// ---------------------------------------------------------------------------
// Instance serialization

nlohmann::ordered_json instance_to_json(const PromptedInstance& p) {
  nlohmann::ordered_json j;
  j["dataset"] = {{"name", p.dataset.name}, {"subset", nullptr}, {"split", p.split}};
  if (p.dataset.subset) j["dataset"]["subset"] = *p.dataset.subset;
  j["example_ordinal"] = p.example_ordinal;
  j["template_id"] = p.template_id;
  j["input"] = p.input;
  j["target"] = p.target;
  j["answer_choices"] = p.answer_choices ? nlohmann::ordered_json(*p.answer_choices)
                                         : nlohmann::ordered_json(nullptr);
  j["spans_input"] = spans_to_json(p.spans_input);
  j["spans_target"] = spans_to_json(p.spans_target);
  return j;
}

PromptedInstance instance_from_json(const nlohmann::json& j) {
  try {
    PromptedInstance p;
    const auto& d = j.at("dataset");
    p.dataset.name = d.at("name").get<std::string>();
    p.dataset.subset = optional_string(d, "subset");
    p.split = d.at("split").get<std::string>();
    p.example_ordinal = j.at("example_ordinal").get<std::uint64_t>();
    p.template_id = j.at("template_id").get<std::string>();
    p.input = j.at("input").get<std::string>();
    p.target = j.at("target").get<std::string>();
    if (auto it = j.find("answer_choices"); it != j.end() && !it->is_null())
      p.answer_choices = it->get<std::vector<std::string>>();
    p.spans_input = spans_from_json(j.at("spans_input"));
    p.spans_target = spans_from_json(j.at("spans_target"));
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed instance: ") + e.what());
  }
}

std::string instance_to_line(const PromptedInstance& p) {
  return instance_to_json(p).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::vector<PromptedInstance> read_instances(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<PromptedInstance> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (tmpl::trim_ascii(line).empty()) continue;
    out.push_back(instance_from_json(parse_json_strict(line, n)));
  }
  return out;
}

void write_instances(const std::string& path, const std::vector<PromptedInstance>& items) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (const auto& p : items) out << instance_to_line(p) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Stats

void SkipStats::merge(const SkipStats& other) {
  examples += other.examples;
  emitted += other.emitted;
  skipped += other.skipped;
  errors += other.errors;
  for (const auto& f : other.failures) {
    if (failures.size() >= kMaxFailures) break;
    failures.push_back(f);
  }
}

nlohmann::ordered_json SkipStats::to_json() const {
  nlohmann::ordered_json j;
  j["examples"] = examples;
  j["emitted"] = emitted;
  j["skipped"] = skipped;
  j["errors"] = errors;
  auto list = nlohmann::ordered_json::array();
  for (const auto& f : failures)
    list.push_back({{"ordinal", f.ordinal}, {"kind", f.kind}, {"message", f.message}});
  j["failures"] = list;
  return j;
}

// ---------------------------------------------------------------------------
// Materialization

void materialize_example(const CompiledTemplate& t, const Example& ex,
                         const MaterializeOptions& opt, std::vector<PromptedInstance>& out,
                         SkipStats& stats) {
  ++stats.examples;
  const std::uint64_t seed = example_seed(opt.seed, ex.ordinal);
  try {
    tmpl::RenderContext ctx;
    ctx.example = ex.fields;
    ctx.example_ordinal = ex.ordinal;
    ctx.rng_seed = seed;
    ctx.answer_choices = render_answer_choices(t, ex, seed);
    ctx.choice_mode = opt.choice_mode;

    std::uint64_t combos = 1;
    if (opt.choice_mode == tmpl::ChoiceMode::Enumerate)
      combos = std::min(tmpl::count_combinations(t.ast, ctx), opt.max_combinations);

    std::vector<PromptedInstance> produced;
    std::uint64_t skipped = 0;
    for (std::uint64_t i = 0; i < combos; ++i) {
      ctx.choice_index = i;
      auto r = tmpl::render(t.ast, ctx);
      if (r.skipped) {
        ++skipped;
        continue;
      }
      if (ctx.answer_choices &&
          std::find(ctx.answer_choices->begin(), ctx.answer_choices->end(), r.target) ==
              ctx.answer_choices->end())
        throw RenderError("target '" + r.target + "' is not one of the answer choices");
      PromptedInstance p;
      p.dataset = t.meta.dataset;
      p.split = opt.split;
      p.example_ordinal = ex.ordinal;
      p.template_id = t.meta.id;
      p.input = std::move(r.input);
      p.target = std::move(r.target);
      p.answer_choices = ctx.answer_choices;
      p.spans_input = std::move(r.spans_input);
      p.spans_target = std::move(r.spans_target);
      produced.push_back(std::move(p));
    }
    // An example counts as skipped only when nothing survived.
    if (produced.empty() && skipped > 0) ++stats.skipped;
    stats.emitted += produced.size();
    for (auto& p : produced) out.push_back(std::move(p));
  } catch (const Error& e) {
    record_failure(stats, ex.ordinal, e);
  }
}

SkipStats materialize(const CompiledTemplate& t, const ExampleSource& source,
                      const MaterializeOptions& opt, const InstanceSink& sink) {
  SkipStats total;
  const unsigned workers = std::max(1u, opt.workers);
  if (workers == 1) {
    std::vector<PromptedInstance> buf;
    while (auto ex = source()) {
      buf.clear();
      materialize_example(t, *ex, opt, buf, total);
      for (auto& p : buf) sink(std::move(p));
    }
    return total;
  }

  const std::size_t chunk = 256 * static_cast<std::size_t>(workers);
  std::vector<Example> batch;
  std::vector<std::vector<PromptedInstance>> results;
  std::vector<SkipStats> stats;
  bool done = false;
  while (!done) {
    batch.clear();
    while (batch.size() < chunk) {
      auto ex = source();
      if (!ex) {
        done = true;
        break;
      }
      batch.push_back(std::move(*ex));
    }
    if (batch.empty()) break;
    results.assign(batch.size(), {});
    stats.assign(batch.size(), {});
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < batch.size(); i += workers)
          materialize_example(t, batch[i], opt, results[i], stats[i]);
      });
    pool.clear();
    for (std::size_t i = 0; i < batch.size(); ++i) {
      total.merge(stats[i]);
      for (auto& p : results[i]) sink(std::move(p));
    }
  }
  return total;
}

std::vector<PromptedInstance> materialize(const CompiledTemplate& t,
                                          const std::vector<Example>& examples,
                                          const MaterializeOptions& opt, SkipStats* stats) {
  std::size_t i = 0;
  std::vector<PromptedInstance> out;
  auto s = materialize(
      t, [&]() -> std::optional<Example> {
        if (i == examples.size()) return std::nullopt;
        return examples[i++];
      },
      opt, [&](PromptedInstance&& p) { out.push_back(std::move(p)); });
  if (stats) *stats = std::move(s);
  return out;
}

nlohmann::ordered_json MaterializeSummary::to_json() const {
  nlohmann::ordered_json j;
  j["dataset"] = dataset;
  j["split"] = split;
  auto counts = nlohmann::ordered_json::object();
  auto list = nlohmann::ordered_json::array();
  for (const auto& t : templates) {
    counts[t.template_id] = t.stats.emitted;
    nlohmann::ordered_json e;
    e["template_id"] = t.template_id;
    e["name"] = t.name;
    e["path"] = t.path;
    e["stats"] = t.stats.to_json();
    list.push_back(std::move(e));
  }
  j["counts"] = counts;
  j["templates"] = list;
  return j;
}

MaterializeSummary materialize_dataset(const std::vector<Template>& templates,
                                       const DatasetDescriptor& dataset,
                                       const MaterializeOptions& opt,
                                       const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir + "': " + ec.message());

  MaterializeSummary summary;
  summary.dataset = dataset.ref().key();
  summary.split = opt.split;
  for (const auto& t : templates) {
    const auto compiled = CompiledTemplate::compile(t);
    const std::string path =
        (std::filesystem::path(out_dir) / (compiled.meta.id + ".jsonl")).string();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    ExampleReader reader(dataset, opt.split);
    auto stats = materialize(
        compiled, [&] { return reader.next(); }, opt,
        [&](PromptedInstance&& p) { out << instance_to_line(p) << '\n'; });
    out.flush();
    if (!out) throw IoError("write failed for '" + path + "'");
    summary.templates.push_back({compiled.meta.id, compiled.meta.name, path, std::move(stats)});
  }
  return summary;
}

}  // namespace promptforge
