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

// promptforge command line: batch pipeline steps and the HTTP service.
// Exit codes: 0 success, 1 validation failure, 2 I/O failure.

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "promptforge/errors.hpp"
#include "promptforge/pipeline.hpp"
#include "promptforge/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace promptforge;

namespace {

struct Common {
  std::string store;
  std::string registry;
  std::string out;
  std::uint64_t seed = 0;
  bool verbose = false;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json_file(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
}

Workspace workspace(const Common& c) {
  TemplateStore store = c.store.empty() ? TemplateStore::from_env() : TemplateStore(c.store);
  std::string reg = c.registry;
  if (reg.empty()) {
    const char* env = std::getenv("PROMPTFORGE_REGISTRY");
    if (env && *env) reg = env;
    else if (fs::exists(store.root() / "registry.json")) reg = (store.root() / "registry.json").string();
  }
  return Workspace(std::move(store), reg.empty() ? std::vector<DatasetDescriptor>{} : load_registry(reg));
}

void emit(const Common& c, const StepOutput& out) {
  if (c.out.empty()) {
    std::cout << out.body << std::flush;
  } else {
    std::ofstream f(c.out, std::ios::binary | std::ios::trunc);
    if (!f || !(f << out.body) || !f.flush()) throw IoError("cannot write '" + c.out + "'");
  }
  if (c.verbose && !out.notes.empty()) std::cerr << out.notes.dump() << "\n";
}

void add_common(CLI::App* sub, Common& c, bool store = true) {
  if (store) {
    sub->add_option("--store", c.store, "Template store root (default: $PROMPTFORGE_STORE)");
    sub->add_option("--registry", c.registry,
                    "Dataset registry JSON (default: $PROMPTFORGE_REGISTRY or <store>/registry.json)");
  }
  sub->add_option("--seed", c.seed, "Random seed")->default_val(0);
  sub->add_option("-o,--out", c.out, "Write the result here instead of stdout");
  sub->add_flag("-v,--verbose", c.verbose, "Print step notes to stderr");
}

volatile std::sig_atomic_t g_stop = 0;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"promptforge: prompt templates, prompted datasets, mixtures, evaluation"};
  app.require_subcommand(1);
  Common c;
  std::vector<std::string> datasets, templates;
  std::string render_split, mat_split, mix_split, eval_split, choice_mode = "seeded", out_dir, instances_dir, instances, spec_file;
  std::string tokenizer = "whitespace";
  std::uint64_t max_combinations = 64, draws = 0, cap = 500000, ordinal = 0, choice_index = 0;
  std::size_t max_input = 1024, max_target = 256, group = 16;
  unsigned workers = 1;

  auto* ingest = app.add_subcommand("ingest", "Check the dataset registry against its files");
  add_common(ingest, c);

  auto* save = app.add_subcommand("save", "Validate and save template records into the store");
  std::vector<std::string> template_files;
  add_common(save, c);
  save->add_option("files", template_files, "JSON files holding a template record or an array")->required();

  auto* render = app.add_subcommand("render", "Render one template against one example");
  std::string source, choices, template_file, example_json, example_file;
  add_common(render, c);
  render->add_option("--source", source, "Template source");
  render->add_option("--choices", choices, "Answer-choices template");
  render->add_option("--template", template_file, "Template record JSON file");
  render->add_option("--example", example_json, "Example record as JSON");
  render->add_option("--example-file", example_file, "Example record JSON file");
  render->add_option("--dataset", datasets, "Dataset key for a stored example");
  render->add_option("--split", render_split, "Split")->default_val("train");
  render->add_option("--ordinal", ordinal, "Example ordinal")->default_val(0);
  render->add_option("--choice-mode", choice_mode, "seeded or enumerate")->default_val("seeded");
  render->add_option("--choice-index", choice_index, "Combination index in enumerate mode");

  auto* materialize = app.add_subcommand("materialize", "Apply stored templates to a dataset split");
  add_common(materialize, c);
  materialize->add_option("--dataset", datasets, "Dataset key (repeatable; default: all with templates)");
  materialize->add_option("--template", templates, "Template id (repeatable; default: all)");
  materialize->add_option("--split", mat_split, "Split")->default_val("train");
  materialize->add_option("--choice-mode", choice_mode, "seeded or enumerate")->default_val("seeded");
  materialize->add_option("--max-combinations", max_combinations, "Enumerate-mode cap")->default_val(64);
  materialize->add_option("--workers", workers, "Render threads")->default_val(1);
  materialize->add_option("--out-dir", out_dir, "Directory for instance files")->required();

  auto* mix = app.add_subcommand("mix", "Sample a capped multitask mixture");
  add_common(mix, c);
  mix->add_option("--dataset", datasets, "Dataset key (repeatable; default: all with templates)");
  mix->add_option("--template", templates, "Template id (repeatable; default: all)");
  mix->add_option("--split", mix_split, "Split")->default_val("train");
  mix->add_option("--cap", cap, "Per-dataset example cap")->default_val(500000);
  mix->add_option("--draws", draws, "Number of draws")->required();
  mix->add_option("--instances-dir", instances_dir, "Resolve draws to materialized instances");
  mix->add_option("--spec", spec_file, "Explicit mixture spec JSON file");

  auto* pack = app.add_subcommand("pack", "Truncate and pack instances into fixed-size sequences");
  add_common(pack, c, false);
  pack->add_option("--instances", instances, "Instance JSONL file")->required();
  pack->add_option("--max-input", max_input, "Input token budget")->default_val(1024);
  pack->add_option("--max-target", max_target, "Target token budget")->default_val(256);
  pack->add_option("--tokenizer", tokenizer, "whitespace or byte")->default_val("whitespace");

  auto* eval = app.add_subcommand("eval", "Rank-classification accuracy per prompt with median and IQR");
  std::string counts, fit, remote;
  double alpha = 1.0;
  add_common(eval, c);
  eval->add_option("--dataset", datasets, "Dataset key (repeatable; default: all with templates)");
  eval->add_option("--template", templates, "Template id (repeatable; default: all)");
  eval->add_option("--split", eval_split, "Split")->default_val("validation");
  eval->add_option("--instances-dir", instances_dir, "Materialized instances")->required();
  eval->add_option("--unigram-counts", counts, "Unigram scorer from a {token: count} file");
  eval->add_option("--unigram-fit", fit, "Unigram scorer fitted on a text or instance file");
  eval->add_option("--alpha", alpha, "Unigram smoothing")->default_val(1.0);
  eval->add_option("--remote", remote, "Remote scorer endpoint URL");
  eval->add_option("--workers", workers, "Scoring threads")->default_val(1);

  auto* scan = app.add_subcommand("scan", "Count 16-token group matches of examples in a corpus");
  std::string corpus, examples, fields, task;
  add_common(scan, c, false);
  scan->add_option("--corpus", corpus, "Corpus: text lines or JSONL with a text field")->required();
  scan->add_option("--examples", examples, "Examples JSONL")->required();
  scan->add_option("--group", group, "Tokens per group")->default_val(16);
  scan->add_option("--fields", fields, "Comma-separated fields (default: all string fields)");
  scan->add_option("--task", task, "Task name for the table");
  scan->add_option("--tokenizer", tokenizer, "whitespace or byte")->default_val("whitespace");

  auto* stats = app.add_subcommand("stats", "Template counts per dataset");
  add_common(stats, c);

  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  std::string host = "127.0.0.1";
  int port = 8080;
  unsigned jobs = 2;
  add_common(serve, c);
  serve->add_option("--host", host, "Bind address")->default_val("127.0.0.1");
  serve->add_option("--port", port, "Port (0 picks a free one)")->default_val(8080);
  serve->add_option("--jobs", jobs, "Concurrent background jobs")->default_val(2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  auto base = [&] {
    json req = json::object();
    if (datasets.size() == 1) req["dataset"] = datasets.front();
    else if (!datasets.empty()) req["datasets"] = datasets;
    if (!templates.empty()) req["templates"] = templates;
    return req;
  };

  try {
    if (ingest->parsed()) {
      const auto out = run_ingest(workspace(c), json::object());
      emit(c, out);
      return out.notes["ok"].get<bool>() ? 0 : 1;
    }
    if (save->parsed()) {
      auto ws = workspace(c);
      json ids = json::array();
      for (const auto& f : template_files) {
        const auto j = read_json_file(f);
        for (const auto& rec : j.is_array() ? j : json::array({j}))
          ids.push_back(ws.store.save(template_from_json(rec)));
      }
      emit(c, {json_body({{"ids", ids}})});
      return 0;
    }
    if (render->parsed()) {
      json req = json::object();
      json t = template_file.empty() ? json::object() : read_json_file(template_file);
      if (!source.empty()) t["source"] = source;
      if (!choices.empty()) t["answer_choices"] = choices;
      req["template"] = t;
      if (!example_json.empty()) {
        try {
          req["example"] = json::parse(example_json);
        } catch (const json::exception& e) {
          throw ValidationError(std::string("--example is not valid JSON: ") + e.what());
        }
      } else if (!example_file.empty()) {
        req["example"] = read_json_file(example_file);
      } else if (!datasets.empty()) {
        req["dataset"] = datasets.front();
        req["split"] = render_split;
      }
      req["example_ordinal"] = ordinal;
      req["seed"] = c.seed;
      req["choice_mode"] = choice_mode;
      req["choice_index"] = choice_index;
      const bool inline_example = req.contains("example");
      const auto out = inline_example ? run_preview(Workspace(TemplateStore(fs::current_path()), {}), req)
                                      : run_preview(workspace(c), req);
      emit(c, out);
      return json::parse(out.body)["ok"].get<bool>() ? 0 : 1;
    }
    if (materialize->parsed()) {
      auto req = base();
      req["split"] = mat_split;
      req["seed"] = c.seed;
      req["choice_mode"] = choice_mode;
      req["max_combinations"] = max_combinations;
      req["workers"] = workers;
      req["out_dir"] = out_dir;
      emit(c, run_materialize(workspace(c), req));
      return 0;
    }
    if (mix->parsed()) {
      auto req = base();
      req["split"] = mix_split;
      req["cap"] = cap;
      req["seed"] = c.seed;
      req["draws"] = draws;
      if (!instances_dir.empty()) req["instances_dir"] = instances_dir;
      if (!spec_file.empty()) req["spec"] = read_json_file(spec_file);
      emit(c, run_mix(workspace(c), req));
      return 0;
    }
    if (pack->parsed()) {
      emit(c, run_pack({{"instances", instances},
                        {"max_input", max_input},
                        {"max_target", max_target},
                        {"tokenizer", tokenizer}}));
      return 0;
    }
    if (eval->parsed()) {
      auto req = base();
      req["split"] = eval_split;
      req["instances_dir"] = instances_dir;
      req["workers"] = workers;
      if (!remote.empty()) req["scorer"] = {{"kind", "remote"}, {"endpoint", remote}};
      else if (!counts.empty()) req["scorer"] = {{"kind", "unigram"}, {"counts", counts}, {"alpha", alpha}};
      else if (!fit.empty()) req["scorer"] = {{"kind", "unigram"}, {"fit", fit}, {"alpha", alpha}};
      else throw ValidationError("eval needs --unigram-counts, --unigram-fit, or --remote");
      emit(c, run_eval(workspace(c), req));
      return 0;
    }
    if (scan->parsed()) {
      json req = {{"corpus", corpus}, {"examples", examples}, {"group", group}, {"task", task},
                  {"tokenizer", tokenizer}};
      if (!fields.empty()) req["fields"] = fields;
      const auto out = run_scan(req);
      emit(c, out);
      std::cerr << out.notes["table"].get<std::string>();
      return 0;
    }
    if (stats->parsed()) {
      emit(c, run_stats(workspace(c)));
      return 0;
    }
    if (serve->parsed()) {
      ServiceConfig cfg;
      cfg.host = host;
      cfg.port = port;
      cfg.job_workers = jobs;
      Service service(workspace(c), cfg);
      const int bound = service.bind();
      std::cerr << "listening on http://" << host << ":" << bound << "\n";
      std::signal(SIGINT, [](int) { g_stop = 1; });
      std::signal(SIGTERM, [](int) { g_stop = 1; });
      service.start();
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      service.stop();
      return 0;
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << error_json(e).dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << error_json(e).dump() << "\n";
    return 1;
  }
  return 0;
}
