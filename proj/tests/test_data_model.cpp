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

#include <cmath>
#include <functional>
#include <set>

#include "promptforge/data_model.hpp"
#include "promptforge/errors.hpp"
#include "test_util.hpp"

using namespace promptforge;
using promptforge::testing::TempDir;
using promptforge::testing::write_file;

TEST_CASE("ingest: JSONL maps objects to records with Int and Float") {
  TempDir dir;
  write_file(dir.file("a.jsonl"),
             "{\"premise\":\"A\",\"label\":0}\n{\"premise\":\"B\",\"label\":1,\"w\":0.5}\n");
  auto ex = read_examples(dir.file("a.jsonl"), FileFormat::Jsonl);
  REQUIRE(ex.size() == 2);
  CHECK(ex[0].ordinal == 0);
  CHECK(ex[1].ordinal == 1);
  CHECK(ex[0].fields.find("premise")->as_str() == "A");
  CHECK(ex[0].fields.find("label")->is_int());
  CHECK(ex[1].fields.find("w")->is_float());
}

TEST_CASE("ingest: CSV maps header columns to strings") {
  TempDir dir;
  write_file(dir.file("a.csv"), "a,b\n1,2\n");
  auto ex = read_examples(dir.file("a.csv"), FileFormat::Csv);
  REQUIRE(ex.size() == 1);
  CHECK(ex[0].fields.find("a")->as_str() == "1");
  CHECK(ex[0].fields.find("b")->as_str() == "2");
}

TEST_CASE("ingest: CSV quoting") {
  TempDir dir;
  write_file(dir.file("q.csv"), "text,n\r\n\"hello, \"\"world\"\"\",1\r\n\"two\nlines\",2\r\n,3\r\n");
  auto ex = read_examples(dir.file("q.csv"), FileFormat::Csv);
  REQUIRE(ex.size() == 3);
  CHECK(ex[0].fields.find("text")->as_str() == "hello, \"world\"");
  CHECK(ex[1].fields.find("text")->as_str() == "two\nlines");
  CHECK(ex[2].fields.find("text")->as_str().empty());
  CHECK(ex[2].fields.find("n")->as_str() == "3");
}

TEST_CASE("ingest: errors carry line numbers") {
  TempDir dir;
  std::string text;
  for (int i = 1; i <= 6; ++i) text += "{\"x\":" + std::to_string(i) + "}\n";
  text += "{\"x\": oops}\n";
  write_file(dir.file("bad.jsonl"), text);
  try {
    read_examples(dir.file("bad.jsonl"), FileFormat::Jsonl);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 7);
  }
  write_file(dir.file("dup.jsonl"), "{\"x\":1}\n{\"x\":1,\"x\":2}\n");
  try {
    read_examples(dir.file("dup.jsonl"), FileFormat::Jsonl);
    FAIL("expected DuplicateKey");
  } catch (const DuplicateKey& e) {
    CHECK(e.line() == 2);
    CHECK(e.key() == "x");
  }
  write_file(dir.file("dup.csv"), "a,a\n1,2\n");
  CHECK_THROWS_AS(read_examples(dir.file("dup.csv"), FileFormat::Csv), DuplicateKey);
  write_file(dir.file("ragged.csv"), "a,b\n1,2\n3\n");
  try {
    read_examples(dir.file("ragged.csv"), FileFormat::Csv);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  write_file(dir.file("arr.jsonl"), "[1,2]\n");
  CHECK_THROWS_AS(read_examples(dir.file("arr.jsonl"), FileFormat::Jsonl), ParseError);
  CHECK_THROWS_AS(read_examples(dir.file("absent.jsonl"), FileFormat::Jsonl), IoError);
}

TEST_CASE("ingest: order-stable across repeated reads") {
  TempDir dir;
  std::string text;
  for (int i = 0; i < 500; ++i) text += "{\"i\":" + std::to_string(i) + ",\"s\":\"v" + std::to_string(i * 7 % 13) + "\"}\n";
  write_file(dir.file("d.jsonl"), text);
  auto a = read_examples(dir.file("d.jsonl"), FileFormat::Jsonl);
  auto b = read_examples(dir.file("d.jsonl"), FileFormat::Jsonl);
  REQUIRE(a.size() == 500);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].ordinal == i);
    CHECK(a[i].fields == b[i].fields);
  }
}

TEST_CASE("Value: JSON round trip") {
  std::mt19937_64 rng(11);
  std::function<Value(int)> gen = [&](int depth) -> Value {
    switch (depth <= 0 ? rng() % 5 : rng() % 7) {
      case 0: return Value();
      case 1: return Value(rng() % 2 == 0);
      case 2: return Value(static_cast<std::int64_t>(rng()));
      case 3: return Value(std::ldexp(static_cast<double>(rng() % 100000) - 50000.0, static_cast<int>(rng() % 40) - 20));
      case 4: return Value("s\"\\n" + std::to_string(rng() % 1000) + "é");
      case 5: {
        Value::List l;
        for (std::size_t i = 0, n = rng() % 4; i < n; ++i) l.push_back(gen(depth - 1));
        return Value(std::move(l));
      }
      default: {
        Value::Record r;
        for (std::size_t i = 0, n = rng() % 4; i < n; ++i) r.emplace("k" + std::to_string(rng() % 10), gen(depth - 1));
        return Value(std::move(r));
      }
    }
  };
  for (int i = 0; i < 500; ++i) {
    const Value v = gen(3);
    const std::string text = to_json(v).dump();
    CHECK(from_json(parse_json_strict(text)) == v);
  }
  // Integral floats stay floats through a dump/parse cycle.
  CHECK(from_json(parse_json_strict(to_json(Value(2.0)).dump())).is_float());
}

TEST_CASE("registry: validation report") {
  TempDir dir;
  write_file(dir.file("data/a_train.jsonl"), "{\"x\":1}\n{\"x\":2}\n");
  write_file(dir.file("data/b_train.csv"), "x\n1\n");
  write_file(dir.file("registry.json"), R"({"datasets": [
    {"name": "a", "splits": {"train": {"path": "data/a_train.jsonl", "format": "jsonl", "example_count": 2}}},
    {"name": "b", "subset": "s", "splits": {"train": {"path": "data/b_train.csv", "format": "csv", "example_count": 1}}}
  ]})");
  auto reg = load_registry(dir.file("registry.json"));
  REQUIRE(reg.size() == 2);
  CHECK(validate_registry(reg).ok());
  CHECK(find_dataset(reg, "b/s") != nullptr);
  CHECK(find_dataset(reg, "b") == nullptr);
  CHECK(ingest_split(reg[0], "train").size() == 2);

  auto broken = reg;
  broken[0].splits["validation"] = {dir.file("data/none.jsonl"), FileFormat::Jsonl, 0};
  broken[1].splits["train"].example_count = 5;
  broken[1].splits["dev"] = broken[1].splits["train"];
  broken.push_back(reg[0]);
  auto report = validate_registry(broken);
  std::multiset<std::string> kinds;
  for (const auto& i : report.issues) kinds.insert(i.kind);
  CHECK(kinds.count("missing_file") == 1);
  CHECK(kinds.count("count_mismatch") == 1);
  CHECK(kinds.count("invalid_split") == 1);
  CHECK(kinds.count("duplicate") == 1);
  CHECK(report.to_json()["ok"] == false);

  auto again = registry_from_json(registry_to_json(reg));
  REQUIRE(again.size() == 2);
  CHECK(again[1].subset == std::optional<std::string>("s"));
  CHECK(again[1].splits.at("train").format == FileFormat::Csv);
}
