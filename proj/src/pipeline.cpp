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

#include "promptforge/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <unordered_map>

#include "promptforge/contamination.hpp"
#include "promptforge/errors.hpp"
#include "promptforge/eval.hpp"
#include "promptforge/materializer.hpp"
#include "promptforge/mixture.hpp"
#include "promptforge/value.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace promptforge {

namespace {

void require_object(const json& req) {
  if (!req.is_null() && !req.is_object()) throw ValidationError("request must be a JSON object");
}

template <class T>
T field(const json& req, const char* key, T def) {
  if (!req.is_object() || !req.contains(key) || req[key].is_null()) return def;
  try {
    return req[key].get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("field '") + key + "' has the wrong type");
  }
}

template <class T>
T required(const json& req, const char* key) {
  if (!req.is_object() || !req.contains(key) || req[key].is_null())
    throw ValidationError(std::string("field '") + key + "' is required");
  return field<T>(req, key, T{});
}

tmpl::ChoiceMode choice_mode(const json& req) {
  const auto m = field<std::string>(req, "choice_mode", "seeded");
  if (m == "seeded") return tmpl::ChoiceMode::Seeded;
  if (m == "enumerate") return tmpl::ChoiceMode::Enumerate;
  throw ValidationError("choice_mode must be 'seeded' or 'enumerate'");
}

const SplitInfo& split_of(const DatasetDescriptor& d, const std::string& split) {
  auto it = d.splits.find(split);
  if (it == d.splits.end())
    throw ValidationError("dataset '" + d.ref().key() + "' has no split '" + split + "'");
  return it->second;
}

std::vector<Template> selected_templates(const Workspace& ws, const DatasetDescriptor& d,
                                         const json& req) {
  auto all = ws.store.load(d.ref());
  if (!req.contains("templates") || req["templates"].is_null()) return all;
  const auto ids = field<std::vector<std::string>>(req, "templates", {});
  std::vector<Template> out;
  for (const auto& id : ids) {
    auto it = std::find_if(all.begin(), all.end(), [&](const Template& t) { return t.id == id; });
    if (it == all.end()) continue;  // templates may span several datasets
    out.push_back(*it);
  }
  return out;
}

fs::path instance_file(const fs::path& dir, const DatasetRef& d, const std::string& split,
                       const std::string& template_id) {
  fs::path p = dir / d.name;
  if (d.subset) p /= *d.subset;
  return p / split / (template_id + ".jsonl");
}

std::string relative_instance_path(const DatasetRef& d, const std::string& split,
                                   const std::string& template_id) {
  return instance_file(fs::path(), d, split, template_id).generic_string();
}

ojson spans_json(const std::vector<tmpl::Span>& spans) {
  auto a = ojson::array();
  for (const auto& s : spans)
    a.push_back({{"start", s.start}, {"end", s.end}, {"origin", tmpl::origin_name(s.origin)}});
  return a;
}

std::uint64_t split_size(const DatasetDescriptor& d, const std::string& split) {
  const auto& info = split_of(d, split);
  if (info.example_count > 0) return info.example_count;
  ExampleReader reader(info.path, info.format);
  std::uint64_t n = 0;
  while (reader.next()) ++n;
  return n;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  if (in.bad()) throw IoError("read failure on '" + path + "'");
  return lines;
}

// Texts for fitting a unigram model: instance JSONL (input and target),
// {"text": ...} JSONL, or plain lines.
std::vector<std::string> fit_texts(const std::string& path) {
  const bool jsonl = path.size() >= 6 && path.compare(path.size() - 6, 6, ".jsonl") == 0;
  auto lines = read_lines(path);
  if (!jsonl) return lines;
  std::vector<std::string> texts;
  std::size_t n = 0;
  for (const auto& line : lines) {
    ++n;
    if (tmpl::trim_ascii(line).empty()) continue;
    const auto j = parse_json_strict(line, n);
    if (j.is_object() && j.contains("input") && j.contains("target")) {
      texts.push_back(j["input"].get<std::string>());
      texts.push_back(j["target"].get<std::string>());
    } else if (j.is_object() && j.contains("text") && j["text"].is_string()) {
      texts.push_back(j["text"].get<std::string>());
    } else {
      throw ParseError("expected an instance or a {\"text\": ...} object", n);
    }
  }
  return texts;
}

std::unique_ptr<Scorer> make_scorer(const json& spec) {
  if (!spec.is_object()) throw ValidationError("field 'scorer' must be an object");
  const auto kind = required<std::string>(spec, "kind");
  if (kind == "unigram") {
    const auto tok = Tokenizer::by_name(field<std::string>(spec, "tokenizer", "whitespace"));
    const double alpha = field<double>(spec, "alpha", 1.0);
    if (spec.contains("counts"))
      return std::make_unique<UnigramScorer>(
          UnigramScorer::from_file(required<std::string>(spec, "counts"), tok, alpha));
    if (spec.contains("fit"))
      return std::make_unique<UnigramScorer>(
          UnigramScorer::from_texts(fit_texts(required<std::string>(spec, "fit")), tok, alpha));
    throw ValidationError("unigram scorer needs 'counts' or 'fit'");
  }
  if (kind == "remote") {
    RemoteScorerConfig cfg;
    cfg.endpoint = required<std::string>(spec, "endpoint");
    cfg.timeout = std::chrono::milliseconds(field<std::int64_t>(spec, "timeout_ms", 5000));
    cfg.max_retries = field<unsigned>(spec, "max_retries", 3);
    cfg.max_in_flight = field<unsigned>(spec, "max_in_flight", 4);
    return std::make_unique<RemoteScorer>(cfg);
  }
  throw ValidationError("unknown scorer kind '" + kind + "'");
}

std::string jsonl_line(const ojson& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
}

}  // namespace

std::string json_body(const ojson& j) {
  return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

const DatasetDescriptor& Workspace::dataset(const std::string& key) const {
  if (const auto* d = find_dataset(registry, key)) return *d;
  throw NotFound("unknown dataset '" + key + "'");
}

std::vector<const DatasetDescriptor*> Workspace::select(const json& req) const {
  std::vector<const DatasetDescriptor*> out;
  if (req.is_object() && req.contains("dataset") && !req["dataset"].is_null()) {
    out.push_back(&dataset(required<std::string>(req, "dataset")));
    return out;
  }
  if (req.is_object() && req.contains("datasets") && !req["datasets"].is_null()) {
    for (const auto& key : field<std::vector<std::string>>(req, "datasets", {}))
      out.push_back(&dataset(key));
    return out;
  }
  std::set<std::string> stored;
  for (const auto& d : store.datasets()) stored.insert(d.key());
  for (const auto& d : registry)
    if (stored.count(d.ref().key())) out.push_back(&d);
  std::sort(out.begin(), out.end(), [](const DatasetDescriptor* a, const DatasetDescriptor* b) {
    return a->ref().key() < b->ref().key();
  });
  return out;
}

StepOutput run_ingest(const Workspace& ws, const json& req) {
  require_object(req);
  const auto report = validate_registry(ws.registry);
  ojson j;
  auto list = ojson::array();
  for (const auto& d : ws.registry) {
    ojson e;
    e["dataset"] = d.ref().key();
    auto splits = ojson::object();
    for (const auto& [name, info] : d.splits)
      splits[name] = {{"format", format_name(info.format)}, {"example_count", info.example_count}};
    e["splits"] = splits;
    list.push_back(std::move(e));
  }
  j["datasets"] = list;
  j["ok"] = report.ok();
  j["issues"] = report.to_json()["issues"];
  StepOutput out{json_body(j)};
  out.notes["ok"] = report.ok();
  return out;
}

StepOutput run_materialize(const Workspace& ws, const json& req) {
  require_object(req);
  MaterializeOptions opt;
  opt.seed = field<std::uint64_t>(req, "seed", 0);
  opt.choice_mode = choice_mode(req);
  opt.max_combinations = field<std::uint64_t>(req, "max_combinations", 64);
  opt.workers = std::max(1u, field<unsigned>(req, "workers", 1));
  opt.split = field<std::string>(req, "split", "train");
  const fs::path out_dir = required<std::string>(req, "out_dir");

  ojson j;
  j["split"] = opt.split;
  j["seed"] = opt.seed;
  j["choice_mode"] = opt.choice_mode == tmpl::ChoiceMode::Seeded ? "seeded" : "enumerate";
  auto list = ojson::array();
  std::uint64_t emitted = 0;
  for (const auto* d : ws.select(req)) {
    (void)split_of(*d, opt.split);
    const auto templates = selected_templates(ws, *d, req);
    if (templates.empty()) continue;
    const auto dir = instance_file(out_dir, d->ref(), opt.split, "x").parent_path();
    auto summary = materialize_dataset(templates, *d, opt, dir.string());
    for (auto& t : summary.templates) {
      t.path = relative_instance_path(d->ref(), opt.split, t.template_id);
      emitted += t.stats.emitted;
    }
    list.push_back(summary.to_json());
  }
  j["datasets"] = list;
  StepOutput out{json_body(j)};
  out.notes["emitted"] = emitted;
  return out;
}

StepOutput run_mix(const Workspace& ws, const json& req) {
  require_object(req);
  const auto draws = required<std::uint64_t>(req, "draws");
  StepOutput out;
  out.content_type = "application/x-ndjson";

  MixtureSpec spec;
  if (req.contains("spec")) {
    spec = MixtureSpec::from_json(req["spec"]);
  } else {
    const auto split = field<std::string>(req, "split", "train");
    spec.cap = field<std::uint64_t>(req, "cap", kDefaultCap);
    spec.seed = field<std::uint64_t>(req, "seed", 0);
    for (const auto* d : ws.select(req)) {
      MixtureEntry e;
      e.dataset = d->ref().key();
      for (const auto& t : selected_templates(ws, *d, req)) e.templates.push_back(t.id);
      if (e.templates.empty()) continue;
      e.n_examples = split_size(*d, split);
      spec.entries.push_back(std::move(e));
    }
  }
  MixtureSampler sampler(spec);
  out.notes["spec"] = spec.to_json();
  out.notes["draws"] = draws;

  if (!req.contains("instances_dir") || req["instances_dir"].is_null()) {
    for (std::uint64_t i = 0; i < draws; ++i) out.body += jsonl_line(draw_to_json(sampler.next()));
    return out;
  }

  const fs::path dir = required<std::string>(req, "instances_dir");
  const auto split = field<std::string>(req, "split", "train");
  std::map<std::pair<std::string, std::string>, std::unordered_map<std::uint64_t, PromptedInstance>>
      cache;
  std::uint64_t resolved = 0, dropped = 0;
  for (std::uint64_t i = 0; i < draws; ++i) {
    const auto d = sampler.next();
    auto key = std::pair{d.dataset, d.template_id};
    auto it = cache.find(key);
    if (it == cache.end()) {
      std::unordered_map<std::uint64_t, PromptedInstance> by_ordinal;
      const auto path = instance_file(dir, parse_dataset_key(d.dataset), split, d.template_id);
      for (auto& p : read_instances(path.string()))
        by_ordinal.try_emplace(p.example_ordinal, std::move(p));
      it = cache.emplace(key, std::move(by_ordinal)).first;
    }
    auto hit = it->second.find(d.example_ordinal);
    if (hit == it->second.end()) {
      ++dropped;  // the example rendered empty or failed
      continue;
    }
    ++resolved;
    out.body += instance_to_line(hit->second) + "\n";
  }
  out.notes["resolved"] = resolved;
  out.notes["dropped"] = dropped;
  return out;
}

StepOutput run_pack(const json& req) {
  require_object(req);
  PackingConfig cfg;
  cfg.max_input_tokens = field<std::size_t>(req, "max_input", 1024);
  cfg.max_target_tokens = field<std::size_t>(req, "max_target", 256);
  cfg.tokenizer = Tokenizer::by_name(field<std::string>(req, "tokenizer", "whitespace"));
  const auto instances = read_instances(required<std::string>(req, "instances"));
  StepOutput out;
  out.content_type = "application/x-ndjson";
  std::size_t sequences = 0, input_tokens = 0;
  Packer packer(cfg, [&](PackedSequence&& s) {
    ++sequences;
    input_tokens += s.input_tokens.size();
    out.body += jsonl_line(packed_to_json(s));
  });
  for (const auto& p : instances) packer.add(p);
  packer.finish();
  out.notes["instances"] = instances.size();
  out.notes["sequences"] = sequences;
  out.notes["input_fill"] =
      sequences == 0 ? 0.0
                     : static_cast<double>(input_tokens) /
                           static_cast<double>(sequences * cfg.max_input_tokens);
  return out;
}

StepOutput run_eval(const Workspace& ws, const json& req) {
  require_object(req);
  const auto split = field<std::string>(req, "split", "validation");
  const fs::path dir = required<std::string>(req, "instances_dir");
  if (!req.contains("scorer")) throw ValidationError("field 'scorer' is required");
  const auto scorer = make_scorer(req["scorer"]);
  const unsigned workers = std::max(1u, field<unsigned>(req, "workers", 1));

  auto reports = ojson::array();
  auto excluded = ojson::array();
  for (const auto* d : ws.select(req)) {
    std::map<std::string, double> per_prompt;
    for (const auto& t : selected_templates(ws, *d, req)) {
      if (!t.original_task) {
        excluded.push_back({{"template_id", t.id}, {"reason", "not an original-task prompt"}});
        continue;
      }
      const auto path = instance_file(dir, d->ref(), split, t.id);
      auto task = EvalTask::from_instances(t, read_instances(path.string()));
      if (task.instances.empty()) {
        excluded.push_back({{"template_id", t.id}, {"reason", "no instances"}});
        continue;
      }
      per_prompt[t.id] = evaluate_task(task, *scorer, workers);
    }
    if (per_prompt.empty()) continue;
    reports.push_back(eval_report_json(d->ref().key(), aggregate(per_prompt)));
  }
  StepOutput out{json_body(reports)};
  out.notes["excluded"] = excluded;
  return out;
}

StepOutput run_scan(const json& req) {
  require_object(req);
  const auto group = field<std::size_t>(req, "group", 16);
  const auto task = field<std::string>(req, "task", "");
  const auto tok = Tokenizer::by_name(field<std::string>(req, "tokenizer", "whitespace"));
  std::vector<std::string> fields;
  if (req.contains("fields") && req["fields"].is_string()) {
    const auto s = req["fields"].get<std::string>();
    for (std::size_t start = 0; start <= s.size();) {
      const auto comma = std::min(s.find(',', start), s.size());
      const auto f = std::string(tmpl::trim_ascii(std::string_view(s).substr(start, comma - start)));
      if (!f.empty()) fields.push_back(f);
      start = comma + 1;
    }
  } else {
    fields = field<std::vector<std::string>>(req, "fields", {});
  }

  const auto examples = read_examples(required<std::string>(req, "examples"), FileFormat::Jsonl);
  if (fields.empty() && !examples.empty() && examples.front().fields.is_record())
    for (const auto& [k, v] : examples.front().fields.as_record())
      if (v.is_str()) fields.push_back(k);

  std::vector<ScanExample> scan;
  scan.reserve(examples.size());
  for (const auto& ex : examples) {
    ScanExample se;
    se.id = std::to_string(ex.ordinal);
    const Value* rec = ex.fields.is_record() ? &ex.fields : nullptr;
    if (rec) {
      const auto& r = rec->as_record();
      if (auto it = r.find("id"); it != r.end() && !it->second.is_null())
        se.id = to_display(it->second);
    }
    for (const auto& f : fields) {
      std::string text;
      if (rec) {
        const auto& r = rec->as_record();
        if (auto it = r.find(f); it != r.end() && !it->second.is_null()) text = to_display(it->second);
      }
      se.fields.push_back({f, std::move(text)});
    }
    scan.push_back(std::move(se));
  }

  const auto index = build_index_from_file(required<std::string>(req, "corpus"), tok);
  const auto report = scan_examples(index, scan, group);
  auto j = report.to_json();
  j["task"] = task;
  j["corpus_tokens"] = index.tokens.size() - (index.num_documents() - 1);
  j["table"] = report.table(task);
  StepOutput out{json_body(j)};
  out.notes["table"] = report.table(task);
  return out;
}

StepOutput run_stats(const Workspace& ws) {
  const auto s = ws.store.stats();
  auto j = s.to_json();
  std::map<std::string, std::size_t> coverage = s.prompts_per_dataset;
  for (const auto& d : ws.registry) coverage.try_emplace(d.ref().key(), 0);
  std::vector<std::pair<std::string, std::size_t>> rows(coverage.begin(), coverage.end());
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });
  auto list = ojson::array();
  for (const auto& [k, n] : rows) list.push_back({{"dataset", k}, {"templates", n}});
  j["coverage"] = list;
  return {json_body(j)};
}

ojson error_json(const std::exception& e) {
  ojson j;
  const auto* pe = dynamic_cast<const Error*>(&e);
  j["kind"] = pe ? pe->kind() : "InternalError";
  j["message"] = e.what();
  SourceLoc loc;
  if (const auto* le = dynamic_cast<const LocatedError*>(&e)) loc = le->loc();
  if (const auto* ve = dynamic_cast<const ValidationError*>(&e)) {
    if (!ve->cause().empty()) j["cause"] = ve->cause();
    loc = ve->loc();
  }
  if (const auto* pe2 = dynamic_cast<const ParseError*>(&e)) j["line"] = pe2->line();
  if (loc.line > 0) {
    j["line"] = loc.line;
    j["column"] = loc.column;
  }
  if (const auto* mf = dynamic_cast<const MissingField*>(&e)) j["field"] = mf->name();
  return j;
}

StepOutput run_preview(const Workspace& ws, const json& req) {
  require_object(req);
  if (!req.contains("template") || !req["template"].is_object())
    throw ValidationError("field 'template' must be an object");
  const auto& tj = req["template"];
  Template t;
  t.name = field<std::string>(tj, "name", "preview");
  t.source = required<std::string>(tj, "source");
  if (tj.contains("answer_choices") && !tj["answer_choices"].is_null())
    t.answer_choices_source = required<std::string>(tj, "answer_choices");

  Example ex;
  ex.ordinal = field<std::uint64_t>(req, "example_ordinal", 0);
  if (req.contains("example") && !req["example"].is_null()) {
    ex.fields = from_json(req["example"]);
    if (!ex.fields.is_record()) throw ValidationError("field 'example' must be an object");
  } else {
    const auto& d = ws.dataset(required<std::string>(req, "dataset"));
    t.dataset = d.ref();
    const auto split = field<std::string>(req, "split", "train");
    ExampleReader reader(d, split);
    std::optional<Example> found;
    while (auto e = reader.next())
      if (e->ordinal == ex.ordinal) {
        found = std::move(e);
        break;
      }
    if (!found)
      throw NotFound("example " + std::to_string(ex.ordinal) + " not found in " + d.ref().key() +
                     "/" + split);
    ex = std::move(*found);
  }

  ojson j;
  j["ok"] = true;
  j["skipped"] = false;
  j["input"] = "";
  j["target"] = "";
  j["spans_input"] = ojson::array();
  j["spans_target"] = ojson::array();
  j["answer_choices"] = nullptr;
  auto diagnostics = ojson::array();
  auto fail = [&](const std::exception& e) {
    auto d = error_json(e);
    d["severity"] = "error";
    diagnostics.push_back(std::move(d));
    j["ok"] = false;
  };
  try {
    const auto ct = CompiledTemplate::compile(t);
    const auto seed = example_seed(field<std::uint64_t>(req, "seed", 0), ex.ordinal);
    tmpl::RenderContext ctx;
    ctx.example = ex.fields;
    ctx.example_ordinal = ex.ordinal;
    ctx.rng_seed = seed;
    ctx.answer_choices = render_answer_choices(ct, ex, seed);
    ctx.choice_mode = choice_mode(req);
    ctx.choice_index = field<std::uint64_t>(req, "choice_index", 0);
    const auto r = tmpl::render(ct.ast, ctx);
    j["skipped"] = r.skipped;
    j["input"] = r.input;
    j["target"] = r.target;
    j["spans_input"] = spans_json(r.spans_input);
    j["spans_target"] = spans_json(r.spans_target);
    if (ctx.answer_choices) j["answer_choices"] = *ctx.answer_choices;
    if (r.skipped)
      diagnostics.push_back({{"kind", "Skipped"},
                             {"message", "input or target is empty; the example would be skipped"},
                             {"severity", "warning"}});
    if (!r.skipped && ctx.answer_choices &&
        std::find(ctx.answer_choices->begin(), ctx.answer_choices->end(), r.target) ==
            ctx.answer_choices->end())
      diagnostics.push_back({{"kind", "RenderError"},
                             {"message", "target '" + r.target + "' is not one of the answer choices"},
                             {"severity", "warning"}});
  } catch (const LocatedError& e) {
    fail(e);
  } catch (const EmptyChoices& e) {
    fail(e);
  }
  j["diagnostics"] = diagnostics;
  j["example"] = {{"ordinal", ex.ordinal}, {"fields", to_json(ex.fields)}};
  return {json_body(j)};
}

}  // namespace promptforge
