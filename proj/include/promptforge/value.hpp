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
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace promptforge {

/// A dynamically-typed record value: the domain templates are evaluated over.
///
/// Lists and records are held behind shared immutable storage, so copying a
/// Value is cheap and a Value is safe to share between threads. Records keep
/// their keys sorted, which makes serialization deterministic.
class Value {
 public:
  enum class Kind { Null, Bool, Int, Float, Str, List, Record };

  using List = std::vector<Value>;
  using Record = std::map<std::string, Value, std::less<>>;

  Value() = default;
  Value(std::nullptr_t) {}
  Value(bool b) : data_(b) {}
  Value(int i) : data_(static_cast<std::int64_t>(i)) {}
  Value(std::int64_t i) : data_(i) {}
  Value(double d) : data_(d) {}
  Value(std::string s) : data_(std::move(s)) {}
  Value(std::string_view s) : data_(std::string(s)) {}
  Value(const char* s) : data_(std::string(s)) {}
  Value(List l) : data_(std::make_shared<const List>(std::move(l))) {}
  Value(Record r) : data_(std::make_shared<const Record>(std::move(r))) {}

  Kind kind() const noexcept { return static_cast<Kind>(data_.index()); }
  bool is_null() const noexcept { return kind() == Kind::Null; }
  bool is_bool() const noexcept { return kind() == Kind::Bool; }
  bool is_int() const noexcept { return kind() == Kind::Int; }
  bool is_float() const noexcept { return kind() == Kind::Float; }
  bool is_number() const noexcept { return is_int() || is_float(); }
  bool is_str() const noexcept { return kind() == Kind::Str; }
  bool is_list() const noexcept { return kind() == Kind::List; }
  bool is_record() const noexcept { return kind() == Kind::Record; }

  // Accessors throw TypeMismatch on the wrong kind.
  bool as_bool() const;
  std::int64_t as_int() const;
  double as_float() const;  // accepts Int as well
  const std::string& as_str() const;
  const List& as_list() const;
  const Record& as_record() const;

  // Record lookup; nullptr when absent or when this is not a record.
  const Value* find(std::string_view key) const;

  bool truthy() const noexcept;

  friend bool operator==(const Value& a, const Value& b);
  friend bool operator!=(const Value& a, const Value& b) { return !(a == b); }

 private:
  std::variant<std::monostate, bool, std::int64_t, double, std::string,
               std::shared_ptr<const List>, std::shared_ptr<const Record>>
      data_;
};

const char* kind_name(Value::Kind k) noexcept;

/// Text form used when a value is substituted into a template. Strings are
/// emitted verbatim; other kinds use Python-style literals ("True", "None",
/// "['a', 'b']") so rendered prompts match the original tooling.
std::string to_display(const Value& v);

/// Shortest round-trip decimal for a double, always with a '.' or exponent.
std::string format_float(double d);

nlohmann::json to_json(const Value& v);

/// JSON numbers without a fractional part or exponent become Int; all other
/// numbers become Float. Integers outside the int64 range become Float.
Value from_json(const nlohmann::json& j);

/// Parses one JSON document, rejecting duplicate object keys. `line` is
/// reported in ParseError/DuplicateKey.
nlohmann::json parse_json_strict(std::string_view text, std::size_t line = 1);

}  // namespace promptforge
