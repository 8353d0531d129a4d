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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>

#include "promptforge/hashing.hpp"
#include "promptforge/template_lang.hpp"
#include "promptforge/utf8.hpp"

namespace promptforge::tmpl {

namespace {

constexpr std::string_view kSeparator = "|||";

// Argument list of one filter call after evaluation.
struct Args {
  std::vector<Value> positional;
  std::map<std::string, Value, std::less<>> keyword;

  const Value* get(std::size_t index, std::string_view name) const {
    if (index < positional.size()) return &positional[index];
    auto it = keyword.find(name);
    return it == keyword.end() ? nullptr : &it->second;
  }
};

const std::string& need_str(const Value& v, const char* what) {
  if (!v.is_str())
    throw TypeMismatch(std::string(what) + " expects a string, got " + kind_name(v.kind()));
  return v.as_str();
}

const Value::List& need_list(const Value& v, const char* what) {
  if (!v.is_list())
    throw TypeMismatch(std::string(what) + " expects a list, got " + kind_name(v.kind()));
  return v.as_list();
}

// Python-style index normalization; throws when out of range.
std::size_t normalize_index(std::int64_t i, std::size_t size) {
  const auto n = static_cast<std::int64_t>(size);
  if (i < 0) i += n;
  if (i < 0 || i >= n)
    throw IndexOutOfRange("index " + std::to_string(i < 0 ? i - n : i) +
                          " out of range for length " + std::to_string(size));
  return static_cast<std::size_t>(i);
}

// Python-style slice bounds, clamped.
std::pair<std::size_t, std::size_t> slice_bounds(const std::optional<std::int64_t>& start,
                                                 const std::optional<std::int64_t>& stop,
                                                 std::size_t size) {
  const auto n = static_cast<std::int64_t>(size);
  auto clamp = [n](std::int64_t v) {
    if (v < 0) v += n;
    return std::clamp<std::int64_t>(v, 0, n);
  };
  const std::int64_t b = start ? clamp(*start) : 0;
  const std::int64_t e = stop ? clamp(*stop) : n;
  return {static_cast<std::size_t>(b), static_cast<std::size_t>(std::max(b, e))};
}

bool numbers_equal(const Value& a, const Value& b) {
  if (a.is_int() && b.is_int()) return a.as_int() == b.as_int();
  return a.as_float() == b.as_float();
}

// Equality used by operators: heterogeneous kinds are an error.
bool strict_equal(const Value& a, const Value& b) {
  if (a.is_number() && b.is_number()) return numbers_equal(a, b);
  if (a.kind() != b.kind())
    throw TypeMismatch(std::string("cannot compare ") + kind_name(a.kind()) + " with " +
                       kind_name(b.kind()));
  return a == b;
}

// Equality used by tests inside filters (reject/selectattr): differing kinds
// are simply unequal.
bool loose_equal(const Value& a, const Value& b) {
  if (a.is_number() && b.is_number()) return numbers_equal(a, b);
  return a == b;
}

int ordering(const Value& a, const Value& b) {
  if (a.is_number() && b.is_number()) {
    if (a.is_int() && b.is_int()) return a.as_int() < b.as_int() ? -1 : (a.as_int() > b.as_int());
    const double x = a.as_float(), y = b.as_float();
    return x < y ? -1 : (x > y);
  }
  if (a.is_str() && b.is_str()) {
    const int c = a.as_str().compare(b.as_str());
    return c < 0 ? -1 : (c > 0);
  }
  throw TypeMismatch(std::string("cannot order ") + kind_name(a.kind()) + " and " +
                     kind_name(b.kind()));
}

std::string ascii_lower(std::string s) {
  for (char& c : s)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return s;
}

std::string ascii_upper(std::string s) {
  for (char& c : s)
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  return s;
}

Value to_int_value(const Value& v, const Value& fallback) {
  switch (v.kind()) {
    case Value::Kind::Int: return v;
    case Value::Kind::Bool: return Value(static_cast<std::int64_t>(v.as_bool()));
    case Value::Kind::Float: {
      const double d = v.as_float();
      if (!std::isfinite(d)) return fallback;
      return Value(static_cast<std::int64_t>(std::trunc(d)));
    }
    case Value::Kind::Str: {
      const std::string_view s = trim_ascii(v.as_str());
      std::int64_t i = 0;
      auto r = std::from_chars(s.data(), s.data() + s.size(), i);
      if (r.ec == std::errc{} && r.ptr == s.data() + s.size()) return Value(i);
      double d = 0;
      auto rd = std::from_chars(s.data(), s.data() + s.size(), d);
      if (rd.ec == std::errc{} && rd.ptr == s.data() + s.size() && std::isfinite(d))
        return Value(static_cast<std::int64_t>(std::trunc(d)));
      return fallback;
    }
    case Value::Kind::Null: return fallback;
    default:
      throw TypeMismatch(std::string("int cannot convert ") + kind_name(v.kind()));
  }
}

std::vector<std::string> split_string(const std::string& s, const Value* sep) {
  std::vector<std::string> parts;
  if (!sep || sep->is_null()) {
    std::size_t i = 0;
    while (i < s.size()) {
      while (i < s.size() && is_ascii_space(s[i])) ++i;
      if (i >= s.size()) break;
      std::size_t j = i;
      while (j < s.size() && !is_ascii_space(s[j])) ++j;
      parts.emplace_back(s.substr(i, j - i));
      i = j;
    }
    return parts;
  }
  const std::string& d = need_str(*sep, "split separator");
  if (d.empty()) throw TypeMismatch("split separator must not be empty");
  std::size_t start = 0;
  for (;;) {
    const auto hit = s.find(d, start);
    if (hit == std::string::npos) {
      parts.emplace_back(s.substr(start));
      return parts;
    }
    parts.emplace_back(s.substr(start, hit - start));
    start = hit + d.size();
  }
}

std::string replace_all(const std::string& s, const std::string& from, const std::string& to) {
  if (from.empty()) {
    // Python inserts the replacement around every character.
    std::string out = to;
    for (const auto& cp : utf8::codepoints(s)) {
      out += cp;
      out += to;
    }
    return out;
  }
  std::string out;
  std::size_t start = 0;
  for (;;) {
    const auto hit = s.find(from, start);
    if (hit == std::string::npos) break;
    out.append(s, start, hit - start);
    out += to;
    start = hit + from.size();
  }
  out.append(s, start, std::string::npos);
  return out;
}

std::string trim_chars(const std::string& s, const std::string& chars) {
  const auto set = utf8::codepoints(chars);
  auto cps = utf8::codepoints(s);
  auto in_set = [&](const std::string& cp) {
    return std::find(set.begin(), set.end(), cp) != set.end();
  };
  std::size_t b = 0, e = cps.size();
  while (b < e && in_set(cps[b])) ++b;
  while (e > b && in_set(cps[e - 1])) --e;
  std::string out;
  for (std::size_t i = b; i < e; ++i) out += cps[i];
  return out;
}

// Accumulates rendered text with provenance spans.
class Writer {
 public:
  void append(std::string_view s, SpanOrigin origin) {
    if (s.empty()) return;
    const std::size_t start = text_.size();
    text_.append(s);
    if (!spans_.empty() && spans_.back().origin == origin && spans_.back().end == start) {
      spans_.back().end = text_.size();
    } else {
      spans_.push_back(Span{start, text_.size(), origin});
    }
  }

  RenderedText take() { return {std::move(text_), std::move(spans_)}; }

 private:
  std::string text_;
  std::vector<Span> spans_;
};

RenderedText trimmed(RenderedText r) {
  std::size_t b = 0, e = r.text.size();
  while (b < e && is_ascii_space(r.text[b])) ++b;
  while (e > b && is_ascii_space(r.text[e - 1])) --e;
  std::vector<Span> spans;
  for (const auto& s : r.spans) {
    const std::size_t lo = std::max(s.start, b), hi = std::min(s.end, e);
    if (lo < hi) spans.push_back(Span{lo - b, hi - b, s.origin});
  }
  return {r.text.substr(b, e - b), std::move(spans)};
}

enum class ChoicePass { Normal, Probe };

class Renderer {
 public:
  Renderer(const TemplateAst& ast, const RenderContext& ctx, ChoicePass pass)
      : ast_(ast), ctx_(ctx), pass_(pass) {
    frames_.emplace_back();
    radices_.assign(static_cast<std::size_t>(ast.choice_sites), 1);
    seen_.assign(static_cast<std::size_t>(ast.choice_sites), false);
    streams_.resize(static_cast<std::size_t>(ast.choice_sites));
  }

  void set_digits(std::vector<std::uint64_t> digits) { digits_ = std::move(digits); }
  const std::vector<std::uint64_t>& radices() const { return radices_; }

  void run(std::size_t begin, std::size_t end, Writer& out) {
    for (std::size_t i = begin; i < end; ++i) exec(ast_.nodes[i], out);
  }

 private:
  using Frame = std::map<std::string, Value, std::less<>>;

  // --------------------------------------------------------------- nodes

  void exec_list(const NodeList& nodes, Writer& out) {
    for (const auto& n : nodes) exec(n, out);
  }

  void exec(const Node& n, Writer& out) {
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, TextNode>) {
            out.append(x.text, SpanOrigin::Literal);
          } else if constexpr (std::is_same_v<T, SubstNode>) {
            const std::string text = to_display(eval(*x.expr));
            if (ast_.kind == SourceKind::FullPrompt &&
                text.find(kSeparator) != std::string::npos)
              throw SeparatorError("substitution produced the '|||' separator",
                                   x.expr->loc);
            out.append(text, SpanOrigin::Substitution);
          } else if constexpr (std::is_same_v<T, IfNode>) {
            for (const auto& br : x.branches) {
              if (eval(*br.condition).truthy()) {
                exec_list(br.body, out);
                return;
              }
            }
            if (x.else_body) exec_list(*x.else_body, out);
          } else if constexpr (std::is_same_v<T, ForNode>) {
            const Value seq = eval(*x.iterable);
            std::vector<Value> items;
            if (seq.is_list()) {
              items = seq.as_list();
            } else if (seq.is_str()) {
              for (auto& cp : utf8::codepoints(seq.as_str())) items.emplace_back(std::move(cp));
            } else if (seq.is_record()) {
              for (const auto& [k, _] : seq.as_record()) items.emplace_back(k);
            } else {
              throw TypeMismatch(std::string("cannot iterate over ") + kind_name(seq.kind()),
                                 x.iterable->loc);
            }
            const auto n_items = static_cast<std::int64_t>(items.size());
            for (std::int64_t i = 0; i < n_items; ++i) {
              Frame frame;
              frame.emplace(x.var, items[static_cast<std::size_t>(i)]);
              frame.emplace("loop", Value(Value::Record{
                                        {"index", Value(i + 1)},
                                        {"index0", Value(i)},
                                        {"first", Value(i == 0)},
                                        {"last", Value(i + 1 == n_items)},
                                        {"length", Value(n_items)},
                                    }));
              frames_.push_back(std::move(frame));
              exec_list(x.body, out);
              frames_.pop_back();
            }
          } else {
            frames_.back()[x.name] = eval(*x.value);
          }
        },
        n.node);
  }

  // --------------------------------------------------------------- exprs

  Value lookup(const std::string& name, SourceLoc loc) const {
    for (auto it = frames_.rbegin(); it != frames_.rend(); ++it) {
      auto f = it->find(name);
      if (f != it->end()) return f->second;
    }
    if (name == "answer_choices" && ctx_.answer_choices) {
      Value::List list;
      for (const auto& c : *ctx_.answer_choices) list.emplace_back(c);
      return list;
    }
    if (const Value* v = ctx_.example.find(name)) return *v;
    throw MissingField(name, loc);
  }

  Value eval(const Expr& e) {
    try {
      return eval_inner(e);
    } catch (RenderError& err) {
      if (err.loc().line == 0) err.set_loc(e.loc);
      throw;
    }
  }

  std::optional<std::int64_t> eval_bound(const ExprPtr& e) {
    if (!e) return std::nullopt;
    Value v = eval(*e);
    if (!v.is_int()) throw TypeMismatch(std::string("slice bound must be int, got ") +
                                        kind_name(v.kind()));
    return v.as_int();
  }

  Value eval_inner(const Expr& e) {
    return std::visit(
        [&](const auto& x) -> Value {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, NameRef>) {
            return lookup(x.name, e.loc);
          } else if constexpr (std::is_same_v<T, LiteralExpr>) {
            return x.value;
          } else if constexpr (std::is_same_v<T, ListExpr>) {
            Value::List list;
            list.reserve(x.items.size());
            for (const auto& item : x.items) list.push_back(eval(*item));
            return list;
          } else if constexpr (std::is_same_v<T, AttrExpr>) {
            const Value obj = eval(*x.object);
            if (!obj.is_record())
              throw TypeMismatch("cannot read attribute '" + x.attr + "' of " +
                                 kind_name(obj.kind()));
            if (const Value* v = obj.find(x.attr)) return *v;
            throw MissingField(x.attr, e.loc);
          } else if constexpr (std::is_same_v<T, IndexExpr>) {
            return index_value(eval(*x.object), eval(*x.index), e.loc);
          } else if constexpr (std::is_same_v<T, SliceExpr>) {
            const Value obj = eval(*x.object);
            const auto start = eval_bound(x.start);
            const auto stop = eval_bound(x.stop);
            if (obj.is_list()) {
              const auto& l = obj.as_list();
              auto [b, en] = slice_bounds(start, stop, l.size());
              return Value::List(l.begin() + static_cast<std::ptrdiff_t>(b),
                                 l.begin() + static_cast<std::ptrdiff_t>(en));
            }
            if (obj.is_str()) {
              const auto cps = utf8::codepoints(obj.as_str());
              auto [b, en] = slice_bounds(start, stop, cps.size());
              std::string out;
              for (std::size_t i = b; i < en; ++i) out += cps[i];
              return out;
            }
            throw TypeMismatch(std::string("cannot slice ") + kind_name(obj.kind()));
          } else if constexpr (std::is_same_v<T, BinaryExpr>) {
            return binary(x);
          } else if constexpr (std::is_same_v<T, NotExpr>) {
            return Value(!eval(*x.operand).truthy());
          } else if constexpr (std::is_same_v<T, CondExpr>) {
            return eval(*x.condition).truthy() ? eval(*x.then_value) : eval(*x.else_value);
          } else {
            return filter(x, e.loc);
          }
        },
        e.node);
  }

  Value index_value(const Value& obj, const Value& idx, SourceLoc loc) {
    if (obj.is_record()) {
      if (!idx.is_str())
        throw TypeMismatch(std::string("record key must be a string, got ") +
                           kind_name(idx.kind()));
      if (const Value* v = obj.find(idx.as_str())) return *v;
      throw MissingField(idx.as_str(), loc);
    }
    if (!idx.is_int())
      throw TypeMismatch(std::string("index must be int, got ") + kind_name(idx.kind()));
    if (obj.is_list()) {
      const auto& l = obj.as_list();
      return l[normalize_index(idx.as_int(), l.size())];
    }
    if (obj.is_str()) {
      auto cps = utf8::codepoints(obj.as_str());
      return std::move(cps[normalize_index(idx.as_int(), cps.size())]);
    }
    throw TypeMismatch(std::string("cannot index ") + kind_name(obj.kind()));
  }

  Value binary(const BinaryExpr& x) {
    if (x.op == BinaryOp::And) {
      Value l = eval(*x.lhs);
      return l.truthy() ? eval(*x.rhs) : l;
    }
    if (x.op == BinaryOp::Or) {
      Value l = eval(*x.lhs);
      return l.truthy() ? l : eval(*x.rhs);
    }
    const Value l = eval(*x.lhs);
    const Value r = eval(*x.rhs);
    switch (x.op) {
      case BinaryOp::Eq: return Value(strict_equal(l, r));
      case BinaryOp::Ne: return Value(!strict_equal(l, r));
      case BinaryOp::Lt: return Value(ordering(l, r) < 0);
      case BinaryOp::Le: return Value(ordering(l, r) <= 0);
      case BinaryOp::Gt: return Value(ordering(l, r) > 0);
      case BinaryOp::Ge: return Value(ordering(l, r) >= 0);
      case BinaryOp::Add:
        if (l.is_int() && r.is_int()) {
          std::int64_t out;
          if (__builtin_add_overflow(l.as_int(), r.as_int(), &out))
            throw TypeMismatch("integer overflow in '+'");
          return Value(out);
        }
        if (l.is_number() && r.is_number()) return Value(l.as_float() + r.as_float());
        if (l.is_str() && r.is_str()) return Value(l.as_str() + r.as_str());
        if (l.is_list() && r.is_list()) {
          Value::List out = l.as_list();
          out.insert(out.end(), r.as_list().begin(), r.as_list().end());
          return out;
        }
        break;
      case BinaryOp::Sub:
        if (l.is_int() && r.is_int()) {
          std::int64_t out;
          if (__builtin_sub_overflow(l.as_int(), r.as_int(), &out))
            throw TypeMismatch("integer overflow in '-'");
          return Value(out);
        }
        if (l.is_number() && r.is_number()) return Value(l.as_float() - r.as_float());
        break;
      default:
        break;
    }
    throw TypeMismatch(std::string("unsupported operands ") + kind_name(l.kind()) + " and " +
                       kind_name(r.kind()));
  }

  // --------------------------------------------------------------- choice

  std::size_t pick(int site, std::size_t n) {
    const auto s = static_cast<std::size_t>(site);
    if (pass_ == ChoicePass::Probe) {
      if (!seen_[s]) {
        radices_[s] = n;
        seen_[s] = true;
      }
      return 0;
    }
    if (ctx_.choice_mode == ChoiceMode::Enumerate) return digits_[s] % n;
    if (!streams_[s])
      streams_[s].emplace(derive_seed({ctx_.rng_seed, ctx_.example_ordinal,
                                       static_cast<std::uint64_t>(site)}));
    return static_cast<std::size_t>(streams_[s]->below(n));
  }

  // --------------------------------------------------------------- filters

  Value filter(const FilterExpr& f, SourceLoc loc) {
    const Value subject = eval(*f.subject);
    Args args;
    for (const auto& a : f.args) {
      if (a.keyword.empty()) args.positional.push_back(eval(*a.value));
      else args.keyword[a.keyword] = eval(*a.value);
    }
    const std::string& name = f.name;

    if (name == "join") {
      const auto& list = need_list(subject, "join");
      const Value* sep = args.get(0, "d");
      const std::string delim = sep ? need_str(*sep, "join separator") : std::string();
      std::string out;
      for (std::size_t i = 0; i < list.size(); ++i) {
        if (i) out += delim;
        out += to_display(list[i]);
      }
      return out;
    }
    if (name == "replace") {
      const Value* from = args.get(0, "old");
      const Value* to = args.get(1, "new");
      if (!from || !to) throw TypeMismatch("replace expects (old, new)");
      return replace_all(need_str(subject, "replace"), need_str(*from, "replace"),
                         need_str(*to, "replace"));
    }
    if (name == "lower") return ascii_lower(need_str(subject, "lower"));
    if (name == "upper") return ascii_upper(need_str(subject, "upper"));
    if (name == "capitalize") {
      auto cps = utf8::codepoints(need_str(subject, "capitalize"));
      std::string out;
      for (std::size_t i = 0; i < cps.size(); ++i)
        out += i == 0 ? ascii_upper(cps[i]) : ascii_lower(cps[i]);
      return out;
    }
    if (name == "trim") {
      const std::string& s = need_str(subject, "trim");
      const Value* chars = args.get(0, "chars");
      if (!chars || chars->is_null()) return std::string(trim_ascii(s));
      return trim_chars(s, need_str(*chars, "trim chars"));
    }
    if (name == "int") {
      const Value* fallback = args.get(0, "default");
      return to_int_value(subject, fallback ? *fallback : Value(std::int64_t{0}));
    }
    if (name == "list") {
      if (subject.is_list()) return subject;
      Value::List out;
      if (subject.is_str()) {
        for (auto& cp : utf8::codepoints(subject.as_str())) out.emplace_back(std::move(cp));
      } else if (subject.is_record()) {
        for (const auto& [k, _] : subject.as_record()) out.emplace_back(k);
      } else {
        throw TypeMismatch(std::string("list cannot convert ") + kind_name(subject.kind()));
      }
      return out;
    }
    if (name == "choice") {
      const auto& list = need_list(subject, "choice");
      if (list.empty()) throw IndexOutOfRange("choice from an empty list", loc);
      return list[pick(f.choice_site, list.size())];
    }
    if (name == "selectattr") {
      const auto& list = need_list(subject, "selectattr");
      const Value* attr = args.get(0, "attribute");
      if (!attr) throw TypeMismatch("selectattr expects an attribute name");
      const std::string& key = need_str(*attr, "selectattr");
      const Value* test = args.get(1, "test");
      const Value* operand = args.get(2, "value");
      if (test && need_str(*test, "selectattr test") != "equalto")
        throw TypeMismatch("selectattr supports only the 'equalto' test");
      if (test && !operand) throw TypeMismatch("selectattr 'equalto' needs a value");
      Value::List out;
      for (const auto& item : list) {
        if (!item.is_record())
          throw TypeMismatch(std::string("selectattr over ") + kind_name(item.kind()));
        const Value* v = item.find(key);
        const bool keep = test ? (v && loose_equal(*v, *operand)) : (v && v->truthy());
        if (keep) out.push_back(item);
      }
      return out;
    }
    if (name == "map") {
      const auto& list = need_list(subject, "map");
      auto it = args.keyword.find("attribute");
      if (it == args.keyword.end()) throw TypeMismatch("map expects attribute=<name>");
      const std::string& key = need_str(it->second, "map attribute");
      auto dflt = args.keyword.find("default");
      Value::List out;
      for (const auto& item : list) {
        if (!item.is_record())
          throw TypeMismatch(std::string("map over ") + kind_name(item.kind()));
        if (const Value* v = item.find(key)) out.push_back(*v);
        else if (dflt != args.keyword.end()) out.push_back(dflt->second);
        else throw MissingField(key, loc);
      }
      return out;
    }
    if (name == "reject") {
      const auto& list = need_list(subject, "reject");
      const Value* test = args.get(0, "test");
      Value::List out;
      if (!test) {
        for (const auto& item : list)
          if (!item.truthy()) out.push_back(item);
        return out;
      }
      if (need_str(*test, "reject test") != "equalto")
        throw TypeMismatch("reject supports only the 'equalto' test");
      const Value* operand = args.get(1, "value");
      if (!operand) throw TypeMismatch("reject 'equalto' needs a value");
      for (const auto& item : list)
        if (!loose_equal(item, *operand)) out.push_back(item);
      return out;
    }
    if (name == "length") {
      if (subject.is_str())
        return Value(static_cast<std::int64_t>(utf8::codepoints(subject.as_str()).size()));
      if (subject.is_list()) return Value(static_cast<std::int64_t>(subject.as_list().size()));
      if (subject.is_record())
        return Value(static_cast<std::int64_t>(subject.as_record().size()));
      throw TypeMismatch(std::string("length of ") + kind_name(subject.kind()));
    }
    if (name == "split") {
      Value::List out;
      for (auto& p : split_string(need_str(subject, "split"), args.get(0, "sep")))
        out.emplace_back(std::move(p));
      return out;
    }
    if (name == "index") {
      const Value* needle = args.get(0, "value");
      if (!needle) throw TypeMismatch("index expects a value");
      if (subject.is_list()) {
        const auto& list = subject.as_list();
        for (std::size_t i = 0; i < list.size(); ++i)
          if (loose_equal(list[i], *needle)) return Value(static_cast<std::int64_t>(i));
        throw IndexOutOfRange("value " + to_display(*needle) + " is not in list", loc);
      }
      const std::string& s = need_str(subject, "index");
      const auto hit = s.find(need_str(*needle, "index"));
      if (hit == std::string::npos) throw IndexOutOfRange("substring not found", loc);
      return Value(static_cast<std::int64_t>(utf8::codepoints(s.substr(0, hit)).size()));
    }
    if (name == "first" || name == "last") {
      if (subject.is_str()) {
        auto cps = utf8::codepoints(subject.as_str());
        if (cps.empty()) throw IndexOutOfRange(name + " of an empty string", loc);
        return name == "first" ? cps.front() : cps.back();
      }
      const auto& list = need_list(subject, name.c_str());
      if (list.empty()) throw IndexOutOfRange(name + " of an empty list", loc);
      return name == "first" ? list.front() : list.back();
    }
    throw UnknownFilter(name, loc);
  }

  const TemplateAst& ast_;
  const RenderContext& ctx_;
  ChoicePass pass_;
  std::vector<Frame> frames_;
  std::vector<std::uint64_t> radices_;
  std::vector<bool> seen_;
  std::vector<std::uint64_t> digits_;
  std::vector<std::optional<Rng>> streams_;
};

void probe(const TemplateAst& ast, Renderer& r) {
  Writer a, b;
  const std::size_t sep = ast.separator.value_or(ast.nodes.size());
  r.run(0, sep, a);
  r.run(sep, ast.nodes.size(), b);
}

std::uint64_t product_saturating(const std::vector<std::uint64_t>& radices) {
  std::uint64_t total = 1;
  for (auto r : radices) {
    if (r == 0) return 0;
    if (total > std::numeric_limits<std::uint64_t>::max() / r)
      return std::numeric_limits<std::uint64_t>::max();
    total *= r;
  }
  return total;
}

// Decodes ctx.choice_index into one digit per site (row-major: the last site
// varies fastest).
std::vector<std::uint64_t> enumerate_digits(const TemplateAst& ast, const RenderContext& ctx) {
  Renderer prober(ast, ctx, ChoicePass::Probe);
  probe(ast, prober);
  const auto& radices = prober.radices();
  const std::uint64_t total = product_saturating(radices);
  if (ctx.choice_index >= total)
    throw IndexOutOfRange("choice_index " + std::to_string(ctx.choice_index) +
                          " out of range for " + std::to_string(total) + " combinations");
  std::vector<std::uint64_t> digits(radices.size(), 0);
  std::uint64_t rest = ctx.choice_index;
  for (std::size_t i = radices.size(); i-- > 0;) {
    digits[i] = rest % radices[i];
    rest /= radices[i];
  }
  return digits;
}

Renderer make_renderer(const TemplateAst& ast, const RenderContext& ctx) {
  Renderer r(ast, ctx, ChoicePass::Normal);
  if (ctx.choice_mode == ChoiceMode::Enumerate && ast.choice_sites > 0)
    r.set_digits(enumerate_digits(ast, ctx));
  return r;
}

}  // namespace

const char* origin_name(SpanOrigin o) noexcept {
  return o == SpanOrigin::Literal ? "literal" : "substitution";
}

RenderedPrompt render(const TemplateAst& ast, const RenderContext& ctx) {
  if (ast.kind != SourceKind::FullPrompt || !ast.separator)
    throw SeparatorError("render requires a full prompt with a '|||' separator", {});
  Renderer r = make_renderer(ast, ctx);
  Writer in, out;
  r.run(0, *ast.separator, in);
  r.run(*ast.separator, ast.nodes.size(), out);
  RenderedText input = trimmed(in.take());
  RenderedText target = trimmed(out.take());
  if (input.text.find(kSeparator) != std::string::npos ||
      target.text.find(kSeparator) != std::string::npos)
    throw SeparatorError("rendered text contains the '|||' separator", {});
  RenderedPrompt p;
  p.skipped = input.text.empty() || target.text.empty();
  p.input = std::move(input.text);
  p.target = std::move(target.text);
  p.spans_input = std::move(input.spans);
  p.spans_target = std::move(target.spans);
  return p;
}

RenderedText render_fragment(const TemplateAst& ast, const RenderContext& ctx) {
  Renderer r = make_renderer(ast, ctx);
  Writer w;
  const std::size_t sep = ast.separator.value_or(ast.nodes.size());
  r.run(0, sep, w);
  r.run(sep, ast.nodes.size(), w);
  return w.take();
}

std::uint64_t count_combinations(const TemplateAst& ast, const RenderContext& ctx) {
  if (ast.choice_sites == 0) return 1;
  Renderer prober(ast, ctx, ChoicePass::Probe);
  probe(ast, prober);
  return product_saturating(prober.radices());
}

}  // namespace promptforge::tmpl
