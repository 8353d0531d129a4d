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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>

#include "promptforge/contamination.hpp"
#include "promptforge/errors.hpp"
#include "promptforge/eval.hpp"
#include "promptforge/materializer.hpp"
#include "promptforge/mixture.hpp"
#include "promptforge/pipeline.hpp"
#include "promptforge/store.hpp"

namespace py = pybind11;
using namespace promptforge;
using nlohmann::json;

namespace {

json to_json(const py::handle& obj) {
  if (obj.is_none()) return json::object();
  const auto text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
  return json::parse(text);
}

py::object to_py(const std::string& text) { return py::module_::import("json").attr("loads")(text); }
py::object to_py(const nlohmann::ordered_json& j) { return to_py(j.dump()); }

// JSON bodies decode to Python values; JSONL bodies to lists.
py::object decode(const StepOutput& out) {
  if (out.content_type != "application/x-ndjson") return to_py(out.body);
  py::list rows;
  std::size_t at = 0;
  while (at < out.body.size()) {
    auto nl = out.body.find('\n', at);
    if (nl == std::string::npos) nl = out.body.size();
    if (nl > at) rows.append(to_py(out.body.substr(at, nl - at)));
    at = nl + 1;
  }
  return rows;
}

template <class F>
py::object step(F&& f) {
  StepOutput out;
  {
    py::gil_scoped_release release;
    out = f();
  }
  return decode(out);
}

class PyWorkspace {
 public:
  PyWorkspace(const std::string& store, const std::optional<std::string>& registry)
      : ws_(TemplateStore(store), registry ? load_registry(*registry) : std::vector<DatasetDescriptor>{}) {}

  std::string save(const py::object& record) {
    auto t = template_from_json(to_json(record));
    py::gil_scoped_release release;
    return ws_.store.save(std::move(t));
  }
  py::list templates(const std::string& dataset) {
    py::list out;
    for (const auto& t : ws_.store.load(parse_dataset_key(dataset))) out.append(to_py(template_to_json(t)));
    return out;
  }
  py::object run(StepOutput (*fn)(const Workspace&, const json&), const py::object& req) {
    const auto r = to_json(req);
    return step([&] { return fn(ws_, r); });
  }
  py::object stats() {
    return step([&] { return run_stats(ws_); });
  }

 private:
  Workspace ws_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Prompt templating, materialization, mixtures, evaluation and contamination scans";

  static PyObject* error_type = PyErr_NewException("promptforge._core.Error", PyExc_Exception, nullptr);
  m.attr("Error") = py::reinterpret_borrow<py::object>(error_type);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::reinterpret_borrow<py::object>(error_type)(e.what());
      inst.attr("kind") = e.kind();
      inst.attr("info") = to_py(error_json(e));
      PyErr_SetObject(error_type, inst.ptr());
    }
  });

  m.def("template_id", &template_id, py::arg("source"), py::arg("answer_choices") = std::nullopt,
        py::arg("name") = "");

  m.def(
      "render",
      [](const std::string& source, const py::object& example, const std::optional<std::string>& answer_choices,
         std::uint64_t seed, const std::string& choice_mode, std::uint64_t choice_index) {
        json t = {{"source", source}};
        if (answer_choices) t["answer_choices"] = *answer_choices;
        const json req = {{"template", t},         {"example", to_json(example)}, {"seed", seed},
                          {"choice_mode", choice_mode}, {"choice_index", choice_index}};
        static const Workspace none(TemplateStore(std::filesystem::path()), {});
        return step([&] { return run_preview(none, req); });
      },
      py::arg("source"), py::arg("example"), py::arg("answer_choices") = std::nullopt, py::arg("seed") = 0,
      py::arg("choice_mode") = "seeded", py::arg("choice_index") = 0,
      "Preview one prompt: input, target, spans and diagnostics.");

  m.def("effective_pair_size", &effective_pair_size, py::arg("n_examples"), py::arg("num_templates"),
        py::arg("cap") = kDefaultCap);

  m.def(
      "aggregate",
      [](const std::vector<double>& accuracies) {
        const auto a = aggregate(accuracies);
        py::dict d;
        d["median"] = a.median;
        d["q1"] = a.q1;
        d["q3"] = a.q3;
        d["iqr"] = a.iqr;
        return d;
      },
      py::arg("accuracies"));

  m.def(
      "rank_classify",
      [](const std::vector<double>& scores) {
        if (scores.empty()) throw ValidationError("no options to rank");
        PromptedInstance p;
        MockTableScorer table;
        std::vector<std::string> options;
        for (std::size_t i = 0; i < scores.size(); ++i) {
          options.push_back(std::to_string(i));
          table.set("", options.back(), scores[i]);
        }
        p.answer_choices = options;
        p.target = options[0];
        return rank_classify(p, table);
      },
      py::arg("scores"), "Index of the highest score, lowest index on ties.");

  m.def("pack", [](const py::object& req) {
    const auto r = to_json(req);
    return step([&] { return run_pack(r); });
  });
  m.def("scan", [](const py::object& req) {
    const auto r = to_json(req);
    return step([&] { return run_scan(r); });
  });

  py::class_<CorpusIndex>(m, "CorpusIndex")
      .def(py::init([](const std::vector<std::string>& docs, const std::string& tokenizer) {
             py::gil_scoped_release release;
             return build_index(docs, Tokenizer::by_name(tokenizer));
           }),
           py::arg("documents"), py::arg("tokenizer") = "whitespace")
      .def_static("from_file", [](const std::string& path, const std::string& tokenizer) {
                    return build_index_from_file(path, Tokenizer::by_name(tokenizer));
                  },
                  py::arg("path"), py::arg("tokenizer") = "whitespace")
      .def("count", py::overload_cast<const CorpusIndex&, const std::string&>(&count_ngram))
      .def("count", py::overload_cast<const CorpusIndex&, const std::vector<std::string>&>(&count_ngram))
      .def_property_readonly("num_tokens", [](const CorpusIndex& c) {
        return c.tokens.size() - (c.num_documents() - 1);
      })
      .def_property_readonly("num_documents", &CorpusIndex::num_documents);

  py::class_<PyWorkspace>(m, "Workspace")
      .def(py::init<const std::string&, const std::optional<std::string>&>(), py::arg("store"),
           py::arg("registry") = std::nullopt)
      .def("save", &PyWorkspace::save, py::arg("template"))
      .def("templates", &PyWorkspace::templates, py::arg("dataset"))
      .def("ingest", [](PyWorkspace& w, const py::object& r) { return w.run(&run_ingest, r); },
           py::arg("request") = py::none())
      .def("materialize", [](PyWorkspace& w, const py::object& r) { return w.run(&run_materialize, r); })
      .def("mix", [](PyWorkspace& w, const py::object& r) { return w.run(&run_mix, r); })
      .def("eval", [](PyWorkspace& w, const py::object& r) { return w.run(&run_eval, r); })
      .def("preview", [](PyWorkspace& w, const py::object& r) { return w.run(&run_preview, r); })
      .def("stats", &PyWorkspace::stats);
}
