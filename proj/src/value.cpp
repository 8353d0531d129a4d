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

#include "promptforge/value.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <set>

#include "promptforge/errors.hpp"

namespace promptforge {

namespace {

[[noreturn]] void wrong_kind(Value::Kind want, Value::Kind got) {
  throw TypeMismatch(std::string("expected ") + kind_name(want) + ", got " +
                     kind_name(got));
}

void append_repr(std::string& out, const Value& v);

void append_quoted(std::string& out, const std::string& s) {
  // Python repr prefers single quotes unless the string contains one.
  const bool has_single = s.find('\'') != std::string::npos;
  const bool has_double = s.find('"') != std::string::npos;
  const char q = (has_single && !has_double) ? '"' : '\'';
  out += q;
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (c == q) out += '\\';
        out += c;
    }
  }
  out += q;
}

void append_repr(std::string& out, const Value& v) {
  switch (v.kind()) {
    case Value::Kind::Str:
      append_quoted(out, v.as_str());
      return;
    case Value::Kind::List: {
      out += '[';
      bool first = true;
      for (const auto& item : v.as_list()) {
        if (!first) out += ", ";
        first = false;
        append_repr(out, item);
      }
      out += ']';
      return;
    }
    case Value::Kind::Record: {
      out += '{';
      bool first = true;
      for (const auto& [k, item] : v.as_record()) {
        if (!first) out += ", ";
        first = false;
        append_quoted(out, k);
        out += ": ";
        append_repr(out, item);
      }
      out += '}';
      return;
    }
    default:
      out += to_display(v);
  }
}

}  // namespace

const char* kind_name(Value::Kind k) noexcept {
  switch (k) {
    case Value::Kind::Null: return "null";
    case Value::Kind::Bool: return "bool";
    case Value::Kind::Int: return "int";
    case Value::Kind::Float: return "float";
    case Value::Kind::Str: return "string";
    case Value::Kind::List: return "list";
    case Value::Kind::Record: return "record";
  }
  return "?";
}

bool Value::as_bool() const {
  if (!is_bool()) wrong_kind(Kind::Bool, kind());
  return std::get<bool>(data_);
}

std::int64_t Value::as_int() const {
  if (!is_int()) wrong_kind(Kind::Int, kind());
  return std::get<std::int64_t>(data_);
}

double Value::as_float() const {
  if (is_int()) return static_cast<double>(std::get<std::int64_t>(data_));
  if (!is_float()) wrong_kind(Kind::Float, kind());
  return std::get<double>(data_);
}

const std::string& Value::as_str() const {
  if (!is_str()) wrong_kind(Kind::Str, kind());
  return std::get<std::string>(data_);
}

const Value::List& Value::as_list() const {
  if (!is_list()) wrong_kind(Kind::List, kind());
  return *std::get<std::shared_ptr<const List>>(data_);
}

const Value::Record& Value::as_record() const {
  if (!is_record()) wrong_kind(Kind::Record, kind());
  return *std::get<std::shared_ptr<const Record>>(data_);
}

const Value* Value::find(std::string_view key) const {
  if (!is_record()) return nullptr;
  const auto& rec = as_record();
  auto it = rec.find(key);
  return it == rec.end() ? nullptr : &it->second;
}

bool Value::truthy() const noexcept {
  switch (kind()) {
    case Kind::Null: return false;
    case Kind::Bool: return std::get<bool>(data_);
    case Kind::Int: return std::get<std::int64_t>(data_) != 0;
    case Kind::Float: return std::get<double>(data_) != 0.0;
    case Kind::Str: return !std::get<std::string>(data_).empty();
    case Kind::List: return !std::get<std::shared_ptr<const List>>(data_)->empty();
    case Kind::Record:
      return !std::get<std::shared_ptr<const Record>>(data_)->empty();
  }
  return false;
}

bool operator==(const Value& a, const Value& b) {
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case Value::Kind::Null: return true;
    case Value::Kind::Bool: return a.as_bool() == b.as_bool();
    case Value::Kind::Int: return a.as_int() == b.as_int();
    case Value::Kind::Float: {
      const double x = a.as_float(), y = b.as_float();
      return x == y || (std::isnan(x) && std::isnan(y));
    }
    case Value::Kind::Str: return a.as_str() == b.as_str();
    case Value::Kind::List: return a.as_list() == b.as_list();
    case Value::Kind::Record: return a.as_record() == b.as_record();
  }
  return false;
}

std::string format_float(double d) {
  if (std::isnan(d)) return "nan";
  if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
  if (d == 0.0) return std::signbit(d) ? "-0.0" : "0.0";

  // Shortest round-trip digits, then laid out the way Python's repr does:
  // positional for exponents in [-4, 16), scientific otherwise.
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, d, std::chars_format::scientific);
  std::string sci(buf, res.ptr);
  std::string out;
  std::size_t pos = 0;
  if (sci[0] == '-') {
    out += '-';
    pos = 1;
  }
  const auto e_pos = sci.find('e');
  std::string digits;
  for (std::size_t i = pos; i < e_pos; ++i)
    if (sci[i] != '.') digits += sci[i];
  const int exp = std::stoi(sci.substr(e_pos + 1));

  if (exp >= -4 && exp < 16) {
    if (exp < 0) {
      out += "0.";
      out.append(static_cast<std::size_t>(-exp - 1), '0');
      out += digits;
    } else if (static_cast<std::size_t>(exp) + 1 >= digits.size()) {
      out += digits;
      out.append(static_cast<std::size_t>(exp) + 1 - digits.size(), '0');
      out += ".0";
    } else {
      out += digits.substr(0, static_cast<std::size_t>(exp) + 1);
      out += '.';
      out += digits.substr(static_cast<std::size_t>(exp) + 1);
    }
    return out;
  }
  out += digits.substr(0, 1);
  if (digits.size() > 1) {
    out += '.';
    out += digits.substr(1);
  }
  out += 'e';
  out += exp < 0 ? '-' : '+';
  const int mag = exp < 0 ? -exp : exp;
  if (mag < 10) out += '0';
  out += std::to_string(mag);
  return out;
}

std::string to_display(const Value& v) {
  switch (v.kind()) {
    case Value::Kind::Null: return "None";
    case Value::Kind::Bool: return v.as_bool() ? "True" : "False";
    case Value::Kind::Int: return std::to_string(v.as_int());
    case Value::Kind::Float: return format_float(v.as_float());
    case Value::Kind::Str: return v.as_str();
    case Value::Kind::List:
    case Value::Kind::Record: {
      std::string out;
      append_repr(out, v);
      return out;
    }
  }
  return {};
}

nlohmann::json to_json(const Value& v) {
  switch (v.kind()) {
    case Value::Kind::Null: return nullptr;
    case Value::Kind::Bool: return v.as_bool();
    case Value::Kind::Int: return v.as_int();
    case Value::Kind::Float: return v.as_float();
    case Value::Kind::Str: return v.as_str();
    case Value::Kind::List: {
      auto arr = nlohmann::json::array();
      for (const auto& item : v.as_list()) arr.push_back(to_json(item));
      return arr;
    }
    case Value::Kind::Record: {
      auto obj = nlohmann::json::object();
      for (const auto& [k, item] : v.as_record()) obj[k] = to_json(item);
      return obj;
    }
  }
  return nullptr;
}

Value from_json(const nlohmann::json& j) {
  using T = nlohmann::json::value_t;
  switch (j.type()) {
    case T::null:
    case T::discarded:
      return {};
    case T::boolean:
      return j.get<bool>();
    case T::number_integer:
      return j.get<std::int64_t>();
    case T::number_unsigned: {
      const auto u = j.get<std::uint64_t>();
      if (u <= static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
        return static_cast<std::int64_t>(u);
      return static_cast<double>(u);
    }
    case T::number_float:
      return j.get<double>();
    case T::string:
      return j.get<std::string>();
    case T::array: {
      Value::List list;
      list.reserve(j.size());
      for (const auto& item : j) list.push_back(from_json(item));
      return list;
    }
    case T::object: {
      Value::Record rec;
      for (const auto& [k, item] : j.items()) rec.emplace(k, from_json(item));
      return rec;
    }
    case T::binary:
      break;
  }
  throw TypeMismatch("unsupported JSON value");
}

nlohmann::json parse_json_strict(std::string_view text, std::size_t line) {
  std::vector<std::set<std::string>> open_objects;
  std::string duplicate;
  auto cb = [&](int /*depth*/, nlohmann::json::parse_event_t event,
                nlohmann::json& parsed) {
    using E = nlohmann::json::parse_event_t;
    switch (event) {
      case E::object_start:
        open_objects.emplace_back();
        break;
      case E::object_end:
        if (!open_objects.empty()) open_objects.pop_back();
        break;
      case E::key:
        if (!open_objects.back().insert(parsed.get<std::string>()).second &&
            duplicate.empty())
          duplicate = parsed.get<std::string>();
        break;
      default:
        break;
    }
    return true;
  };
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.begin(), text.end(), cb);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), line);
  }
  if (!duplicate.empty()) throw DuplicateKey(duplicate, line);
  return j;
}

}  // namespace promptforge
