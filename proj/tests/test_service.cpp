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

#include <doctest.h>

#include <set>

#include "fixture_support.hpp"

using namespace promptforge;
using nlohmann::json;
using promptforge::testing::ApiClient;
using promptforge::testing::TempDir;

namespace {

const std::string kRegistry = PROMPTFORGE_FIXTURES_DIR "/pipeline/registry.json";
const std::string kTemplates = PROMPTFORGE_FIXTURES_DIR "/pipeline/templates.json";
const std::string kNliSource =
    "If {{premise}} is true, is it also true that {{hypothesis}}? ||| {{ answer_choices[label] }}";

struct Fixture {
  TempDir dir;
  Service service{Workspace(TemplateStore(dir.path() / "store"), load_registry(kRegistry))};
  std::unique_ptr<ApiClient> api;

  Fixture() {
    service.start();
    api = std::make_unique<ApiClient>(service.port());
  }
  ~Fixture() { service.stop(); }

  json get_json(const std::string& path, int expect = 200) {
    auto r = api->get(path);
    REQUIRE(r);
    CHECK(r->status == expect);
    return json::parse(r->body);
  }
};

json nli_template(const std::string& name = "is it also true") {
  return {{"name", name},
          {"dataset", "toy_nli"},
          {"source", kNliSource},
          {"answer_choices", "Yes ||| Maybe ||| No"},
          {"original_task", true}};
}

}  // namespace

TEST_CASE("datasets are listed with template counts") {
  Fixture f;
  auto r = f.api->put("/datasets/toy_nli/templates", nli_template());
  REQUIRE(r);
  CHECK(r->status == 200);
  const auto list = f.get_json("/datasets");
  REQUIRE(list.size() == 3);
  std::map<std::string, json> by_key;
  for (const auto& d : list) by_key[d["dataset"]] = d;
  CHECK(by_key.count("toy_sentiment/movies") == 1);
  CHECK(by_key["toy_nli"]["templates"] == 1);
  CHECK(by_key["toy_qa"]["templates"] == 0);
  CHECK(by_key["toy_nli"]["splits"]["train"]["example_count"] == 400);
}

TEST_CASE("examples are paginated") {
  Fixture f;
  auto page = f.get_json("/datasets/toy_nli/examples");
  CHECK(page["total"] == 400);
  CHECK(page["limit"] == 20);
  REQUIRE(page["examples"].size() == 20);
  CHECK(page["examples"][0]["ordinal"] == 0);
  CHECK(page["examples"][0]["fields"].contains("premise"));

  page = f.get_json("/datasets/toy_nli/examples?offset=390&limit=50");
  REQUIRE(page["examples"].size() == 10);
  CHECK(page["examples"][9]["ordinal"] == 399);

  page = f.get_json("/datasets/toy_sentiment/movies/examples?split=validation&limit=5");
  CHECK(page["total"] == 100);
  CHECK(page["examples"].size() == 5);

  // Pages tile the split without gaps or repeats.
  std::set<std::uint64_t> seen;
  for (int off = 0; off < 100; off += 30)
  {
    const auto page30 =
        f.get_json("/datasets/toy_qa/examples?split=validation&limit=30&offset=" + std::to_string(off));
    for (const auto& e : page30["examples"]) CHECK(seen.insert(e["ordinal"].get<std::uint64_t>()).second);
  }
  CHECK(seen.size() == 100);

  f.get_json("/datasets/toy_nli/examples?limit=0", 400);
  f.get_json("/datasets/toy_nli/examples?split=test", 404);
  f.get_json("/datasets/nope/examples", 404);
}

TEST_CASE("template CRUD and conflicts") {
  Fixture f;
  auto r = f.api->put("/datasets/toy_nli/templates", nli_template());
  REQUIRE(r);
  REQUIRE(r->status == 200);
  const auto id = json::parse(r->body)["id"].get<std::string>();
  CHECK(id.size() == 16);

  // Idempotent re-save.
  r = f.api->put("/datasets/toy_nli/templates", nli_template());
  CHECK(r->status == 200);
  CHECK(f.get_json("/datasets/toy_nli/templates").size() == 1);

  auto got = f.get_json("/datasets/toy_nli/templates/" + id);
  CHECK(got["source"] == kNliSource);
  CHECK(got["id"] == id);

  // Update to new content changes the id.
  auto changed = nli_template();
  changed["source"] = "Does {{premise}} imply {{hypothesis}}? ||| {{ answer_choices[label] }}";
  r = f.api->put("/datasets/toy_nli/templates/" + id, changed);
  REQUIRE(r->status == 200);
  const auto id2 = json::parse(r->body)["id"].get<std::string>();
  CHECK(id2 != id);
  f.get_json("/datasets/toy_nli/templates/" + id, 404);

  // Updating onto an existing id conflicts.
  r = f.api->put("/datasets/toy_nli/templates", nli_template());
  REQUIRE(r->status == 200);
  r = f.api->put("/datasets/toy_nli/templates/" + id2, nli_template());
  CHECK(r->status == 409);
  CHECK(json::parse(r->body)["error"]["kind"] == "ConflictError");

  // Dataset mismatch between path and body.
  auto other = nli_template();
  other["dataset"] = "toy_qa";
  CHECK(f.api->put("/datasets/toy_nli/templates", other)->status == 400);

  r = f.api->del("/datasets/toy_nli/templates/" + id2);
  CHECK(r->status == 200);
  CHECK(f.api->del("/datasets/toy_nli/templates/" + id2)->status == 404);
  CHECK(f.get_json("/datasets/toy_nli/templates").size() == 1);
}

TEST_CASE("invalid templates are rejected with location and leave the store unchanged") {
  Fixture f;
  REQUIRE(f.api->put("/datasets/toy_nli/templates", nli_template())->status == 200);
  const auto before = testing::read_file((f.dir.path() / "store" / "toy_nli" / "templates.json").string());

  auto bad = nli_template("broken");
  bad["source"] = "Premise: {{premise}}\nIs it {{ hypothesis | }}? ||| {{ answer_choices[label] }}";
  auto r = f.api->put("/datasets/toy_nli/templates", bad);
  REQUIRE(r);
  CHECK(r->status == 400);
  auto err = json::parse(r->body)["error"];
  CHECK(err["kind"] == "ValidationError");
  CHECK(err["cause"] == "SyntaxError");
  CHECK(err["line"] == 2);
  CHECK(err["column"].get<int>() > 0);

  bad["source"] = "No separator here {{premise}}";
  r = f.api->put("/datasets/toy_nli/templates", bad);
  CHECK(r->status == 400);
  CHECK(json::parse(r->body)["error"]["cause"] == "SeparatorError");

  bad = nli_template("");
  CHECK(f.api->put("/datasets/toy_nli/templates", bad)->status == 400);
  CHECK(f.api->put("/datasets/toy_nli/templates", json("not an object"))->status == 400);
  auto raw = f.api->get("/datasets/toy_nli/templates");
  CHECK(testing::read_file((f.dir.path() / "store" / "toy_nli" / "templates.json").string()) == before);
  CHECK(json::parse(raw->body).size() == 1);
}

TEST_CASE("preview renders a stored example with spans") {
  Fixture f;
  json req = {{"template", {{"source", kNliSource}, {"answer_choices", "Yes ||| Maybe ||| No"}}},
              {"dataset", "toy_nli"},
              {"split", "train"},
              {"example_ordinal", 3}};
  auto r = f.api->post("/preview", req);
  REQUIRE(r);
  REQUIRE(r->status == 200);
  const auto p = json::parse(r->body);
  CHECK(p["ok"] == true);
  CHECK(p["skipped"] == false);
  const auto fields = p["example"]["fields"];
  const auto premise = fields["premise"].get<std::string>();
  const auto hypothesis = fields["hypothesis"].get<std::string>();
  const std::vector<std::string> choices{"Yes", "Maybe", "No"};
  CHECK(p["input"] == "If " + premise + " is true, is it also true that " + hypothesis + "?");
  CHECK(p["target"] == choices.at(fields["label"].get<std::size_t>()));
  CHECK(p["answer_choices"] == json(choices));

  // Spans tile the input and the substitutions are exactly the field values.
  const auto input = p["input"].get<std::string>();
  std::size_t pos = 0;
  std::vector<std::string> subs;
  for (const auto& s : p["spans_input"]) {
    CHECK(s["start"] == pos);
    pos = s["end"].get<std::size_t>();
    if (s["origin"] == "substitution")
      subs.push_back(input.substr(s["start"].get<std::size_t>(), pos - s["start"].get<std::size_t>()));
  }
  CHECK(pos == input.size());
  CHECK(subs == std::vector<std::string>{premise, hypothesis});
  REQUIRE(p["spans_target"].size() == 1);
  CHECK(p["spans_target"][0]["origin"] == "substitution");
}

TEST_CASE("preview reports diagnostics instead of failing") {
  Fixture f;
  json example = {{"premise", "A dog runs."}, {"hypothesis", "An animal moves."}, {"label", 0}};

  auto p = json::parse(f.api->post("/preview", {{"template", {{"source", "Just {{premise}}"}}},
                                                {"example", example}})->body);
  CHECK(p["ok"] == false);
  REQUIRE(p["diagnostics"].size() >= 1);
  CHECK(p["diagnostics"][0]["kind"] == "SeparatorError");
  CHECK(p["diagnostics"][0]["line"] == 1);

  p = json::parse(f.api->post("/preview", {{"template", {{"source", "{{ premise }} {{ evidence }} ||| x"}}},
                                           {"example", example}})->body);
  CHECK(p["ok"] == false);
  REQUIRE(p["diagnostics"].size() >= 1);
  CHECK(p["diagnostics"][0]["kind"] == "MissingField");
  CHECK(p["diagnostics"][0]["field"] == "evidence");

  p = json::parse(f.api->post("/preview", {{"template", {{"source", "{{premise}} ||| {% if label == 1 %}{{ premise }}{% endif %}"}}},
                                           {"example", example}})->body);
  CHECK(p["skipped"] == true);
}

TEST_CASE("background jobs report status and results") {
  Fixture f;
  REQUIRE(f.api->put("/datasets/toy_nli/templates", nli_template())->status == 200);
  const auto out = (f.dir.path() / "inst").string();
  auto r = f.api->post("/materialize", {{"dataset", "toy_nli"}, {"split", "validation"}, {"out_dir", out}});
  REQUIRE(r);
  CHECK(r->status == 202);
  const auto id = json::parse(r->body)["job_id"].get<std::string>();

  std::string err;
  const auto body = f.api->run_job("/materialize",
                                   {{"dataset", "toy_nli"}, {"split", "validation"}, {"out_dir", out}}, &err);
  INFO(err);
  REQUIRE_FALSE(body.empty());
  const auto summary = json::parse(body);
  CHECK(summary["split"] == "validation");

  // The first job finishes too.
  for (int i = 0; i < 2000; ++i) {
    if (f.get_json("/jobs/" + id)["status"] == "done") break;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  const auto status = f.get_json("/jobs/" + id);
  CHECK(status["status"] == "done");
  CHECK(status.contains("result"));

  f.get_json("/jobs/does-not-exist", 404);
  CHECK(f.api->get("/jobs/does-not-exist/result")->status == 404);

  const auto failing = f.api->post("/materialize", {{"dataset", "nope"}, {"out_dir", out}});
  const auto fid = json::parse(failing->body)["job_id"].get<std::string>();
  json st;
  for (int i = 0; i < 2000; ++i) {
    st = f.get_json("/jobs/" + fid);
    if (st["status"] != "queued" && st["status"] != "running") break;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  CHECK(st["status"] == "failed");
  CHECK(st["error"]["kind"] == "NotFound");
  CHECK(f.api->get("/jobs/" + fid + "/result")->status == 400);
}

TEST_CASE("stats endpoint matches the pipeline step") {
  Fixture f;
  for (const auto& rec : json::parse(testing::read_file(kTemplates))) {
    auto key = template_from_json(rec).dataset.key();
    REQUIRE(f.api->put("/datasets/" + key + "/templates", rec)->status == 200);
  }
  const auto api_stats = f.api->get("/stats")->body;
  Workspace ws(TemplateStore(f.dir.path() / "store"), load_registry(kRegistry));
  CHECK(api_stats == run_stats(ws).body);
  const auto s = json::parse(api_stats);
  CHECK(s["total_prompts"] == 7);
  CHECK(s["total_datasets"] == 3);
}

TEST_CASE("malformed requests map to error statuses") {
  Fixture f;
  auto r = f.api->post("/preview", json::object());
  CHECK(r->status == 400);
  httplib::Client raw("127.0.0.1", f.service.port());
  auto bad = raw.Post("/pack", "{not json", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(json::parse(bad->body)["error"].contains("kind"));
  CHECK(f.api->get("/no/such/route")->status == 404);
  auto pack = f.api->post("/pack", {{"instances", (f.dir.path() / "missing.jsonl").string()}});
  CHECK(pack->status == 500);
  CHECK(json::parse(pack->body)["error"]["kind"] == "IoError");
}

TEST_CASE("CLI and API produce byte-identical pipeline outputs") {
  TempDir work;
  const auto rep = testing::run_pipeline_parity(PROMPTFORGE_CLI, PROMPTFORGE_FIXTURES_DIR, work.path());
  for (const auto& s : rep.steps) {
    INFO(s.name << ": " << s.detail);
    CHECK(s.cli_ok);
    CHECK(s.identical);
  }
  CHECK(rep.steps.size() == 10);
  CHECK(rep.cli_seconds < 60.0);
}
