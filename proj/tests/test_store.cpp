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

#include <fstream>
#include <random>
#include <thread>

#include "promptforge/errors.hpp"
#include "promptforge/store.hpp"
#include "test_util.hpp"

using namespace promptforge;
using promptforge::testing::TempDir;

namespace {

Template make(const std::string& dataset, const std::string& name, const std::string& source) {
  Template t;
  t.name = name;
  t.dataset = parse_dataset_key(dataset);
  t.source = source;
  return t;
}

struct SimulatedCrash {};

}  // namespace

TEST_CASE("parse_dataset_key") {
  CHECK(parse_dataset_key("super_glue/rte") == DatasetRef{"super_glue", "rte"});
  CHECK(parse_dataset_key("anli") == DatasetRef{"anli", std::nullopt});
  CHECK_THROWS_AS(parse_dataset_key(""), ValidationError);
  CHECK_THROWS_AS(parse_dataset_key("../x"), ValidationError);
  CHECK_THROWS_AS(parse_dataset_key("a/b/c"), ValidationError);
  CHECK_THROWS_AS(parse_dataset_key("a/"), ValidationError);
}

TEST_CASE("stats: trivial stores") {
  TempDir dir;
  TemplateStore store(dir.path());
  auto empty = store.stats();
  CHECK(empty.total_prompts == 0);
  CHECK(empty.total_datasets == 0);
  CHECK(empty.average == 0.0);

  for (int d = 1; d <= 3; ++d)
    for (int i = 0; i < d; ++i)
      store.save(make("ds" + std::to_string(d), "t" + std::to_string(i), "x {{a}} ||| y"));
  auto s = store.stats();
  CHECK(s.total_prompts == 6);
  CHECK(s.total_datasets == 3);
  CHECK(s.average == doctest::Approx(2.0));
  CHECK(s.prompts_per_dataset.at("ds3") == 3);
}

TEST_CASE("save: round trip including metadata") {
  TempDir dir;
  TemplateStore store(dir.path());
  auto t = make("super_glue/rte", "does it follow",
                "{{premise}} Does this mean that \"{{hypothesis}}\" is true? ||| {{answer_choices[label]}}");
  t.answer_choices_source = "Yes ||| No";
  t.original_task = true;
  t.choices_in_prompt = false;
  t.metrics = {"Accuracy"};
  t.reference = "hand written";
  const auto id = store.save(t);
  CHECK(id == template_id(t.source, t.answer_choices_source, t.name));
  CHECK(std::filesystem::exists(dir.path() / "super_glue" / "rte" / "templates.json"));
  auto loaded = store.find(t.dataset, id);
  REQUIRE(loaded);
  t.id = id;
  CHECK(*loaded == t);
  CHECK(store.datasets() == std::vector<DatasetRef>{{"super_glue", "rte"}});
  CHECK(store.save(t) == id);  // idempotent
  CHECK(store.load(t.dataset).size() == 1);
}

TEST_CASE("save: random templates round trip") {
  TempDir dir;
  TemplateStore store(dir.path());
  std::mt19937_64 rng(2);
  std::vector<Template> saved;
  for (int i = 0; i < 60; ++i) {
    auto t = make("d" + std::to_string(rng() % 4), "n" + std::to_string(i),
                  "q" + std::to_string(rng()) + " {{f" + std::to_string(rng() % 3) + "}} ||| a");
    if (rng() % 2) t.answer_choices_source = "x ||| y" + std::to_string(rng() % 9);
    t.original_task = rng() % 2;
    t.choices_in_prompt = rng() % 2;
    t.reference = "r\"é" + std::to_string(i);
    if (rng() % 2) t.metrics = {"Accuracy", "BLEU"};
    t.id = store.save(t);
    saved.push_back(t);
  }
  for (const auto& t : saved) CHECK(store.find(t.dataset, t.id) == t);
}

TEST_CASE("save: validation failures leave the store unchanged") {
  TempDir dir;
  TemplateStore store(dir.path());
  store.save(make("a", "ok", "x ||| y"));
  const auto before = promptforge::testing::read_file(store.dataset_file({"a", std::nullopt}));
  try {
    store.save(make("a", "bad", "x ||| y ||| z"));
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.cause() == "SeparatorError");
  }
  try {
    store.save(make("a", "bad", "line one\n{{ x + }} ||| z"));
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.cause() == "SyntaxError");
    CHECK(e.loc().line == 2);
  }
  CHECK_THROWS_AS(store.save(make("a", "", "x ||| y")), ValidationError);
  CHECK(promptforge::testing::read_file(store.dataset_file({"a", std::nullopt})) == before);
}

TEST_CASE("save: same id with different content conflicts") {
  TempDir dir;
  TemplateStore store(dir.path());
  auto t = make("a", "n", "x ||| y");
  const auto id = store.save(t);
  t.reference = "changed";
  CHECK_THROWS_AS(store.save(t), ConflictError);
  CHECK(store.update(t.dataset, id, t) == id);
  CHECK(store.find(t.dataset, id)->reference == "changed");

  auto edited = t;
  edited.source = "x2 ||| y";
  const auto id2 = store.update(t.dataset, id, edited);
  CHECK(id2 != id);
  CHECK_FALSE(store.find(t.dataset, id));
  CHECK(store.load(t.dataset).size() == 1);
  CHECK_THROWS_AS(store.update(t.dataset, "0000000000000000", edited), NotFound);

  const auto id3 = store.save(make("a", "other", "z ||| y"));
  auto clash = edited;
  clash.name = "other";
  clash.source = "z ||| y";
  CHECK_THROWS_AS(store.update(t.dataset, id2, clash), ConflictError);
  store.remove(t.dataset, id3);
  CHECK(store.load(t.dataset).size() == 1);
  CHECK_THROWS_AS(store.remove(t.dataset, id3), NotFound);
}

TEST_CASE("save: concurrent writers serialize") {
  TempDir dir;
  TemplateStore store(dir.path());
  std::vector<std::string> ids(16);
  {
    std::vector<std::jthread> threads;
    for (int i = 0; i < 16; ++i)
      threads.emplace_back([&, i] {
        TemplateStore copy = store;
        ids[static_cast<std::size_t>(i)] =
            copy.save(make("shared", "t" + std::to_string(i % 8), "x ||| y"));
      });
  }
  CHECK(store.load({"shared", std::nullopt}).size() == 8);
  for (int i = 0; i < 8; ++i) CHECK(ids[static_cast<std::size_t>(i)] == ids[static_cast<std::size_t>(i + 8)]);
  // Fresh store objects (separate lock tables) still serialize through the file lock.
  {
    std::vector<std::jthread> threads;
    for (int i = 0; i < 12; ++i)
      threads.emplace_back([&, i] {
        TemplateStore other(dir.path());
        other.save(make("shared", "u" + std::to_string(i), "x ||| y"));
      });
  }
  CHECK(store.load({"shared", std::nullopt}).size() == 20);
}

TEST_CASE("save: interrupted replacement never tears the file") {
  for (const char* stage : {"write", "fsync", "rename"}) {
    CAPTURE(stage);
    TempDir dir;
    TemplateStore store(dir.path());
    store.save(make("a", "first", "x ||| y"));
    const auto file = store.dataset_file({"a", std::nullopt});
    const auto before = promptforge::testing::read_file(file);
    store.set_fault_hook([&](std::string_view s) {
      if (s == stage) throw SimulatedCrash{};
    });
    CHECK_THROWS_AS(store.save(make("a", "second", "z ||| y")), SimulatedCrash);
    CHECK(promptforge::testing::read_file(file) == before);
    CHECK(store.load({"a", std::nullopt}).size() == 1);
    std::size_t leftovers = 0;
    for (const auto& e : std::filesystem::directory_iterator(file.parent_path()))
      leftovers += e.path().filename().string().starts_with(".templates.json.tmp");
    CHECK(leftovers == 0);
    store.set_fault_hook(nullptr);
    store.save(make("a", "second", "z ||| y"));
    CHECK(store.load({"a", std::nullopt}).size() == 2);
  }
}

TEST_CASE("save: journal records begin and commit") {
  TempDir dir;
  TemplateStore store(dir.path());
  const auto id = store.save(make("a", "n", "x ||| y"));
  std::ifstream in(dir.path() / "journal.jsonl");
  std::string l1, l2;
  std::getline(in, l1);
  std::getline(in, l2);
  auto j1 = nlohmann::json::parse(l1), j2 = nlohmann::json::parse(l2);
  CHECK(j1["state"] == "begin");
  CHECK(j2["state"] == "commit");
  CHECK(j2["id"] == id);
  CHECK(store.datasets().size() == 1);
}

TEST_CASE("load: corrupt file is an IoError") {
  TempDir dir;
  promptforge::testing::write_file(dir.file("x/templates.json"), "[{");
  TemplateStore store(dir.path());
  CHECK_THROWS_AS(store.load({"x", std::nullopt}), IoError);
  CHECK_THROWS_AS(store.stats(), IoError);
}
