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
#include <set>

#include "promptforge/template_lang.hpp"
#include "promptforge/utf8.hpp"

namespace promptforge::tmpl {

namespace {

constexpr std::string_view kSeparator = "|||";

bool is_ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_reserved(std::string_view s) {
  return s == "and" || s == "or" || s == "not" || s == "if" || s == "else" ||
         s == "in";
}

enum class Tok { Ident, Int, String, Punct, End, Eof };

struct Token {
  Tok type = Tok::Eof;
  std::string text;  // identifier / punctuation / decoded string / digits
  std::size_t offset = 0;
};

std::string describe(const Token& t) {
  switch (t.type) {
    case Tok::Ident: return "'" + t.text + "'";
    case Tok::Int: return "integer " + t.text;
    case Tok::String: return "string literal";
    case Tok::Punct: return "'" + t.text + "'";
    case Tok::End: return "'" + t.text + "'";
    case Tok::Eof: return "end of input";
  }
  return "?";
}

struct BlockEnd {
  std::string tag;  // "elif", "else", "endif", "endfor"; empty at EOF
  ExprPtr condition;  // for elif
  SourceLoc loc;
};

class Parser {
 public:
  Parser(std::string_view src, SourceKind kind) : src_(src), kind_(kind) {
    line_starts_.push_back(0);
    for (std::size_t i = 0; i < src_.size(); ++i)
      if (src_[i] == '\n') line_starts_.push_back(i + 1);
  }

  TemplateAst run() {
    if (!utf8::is_valid(src_)) throw SyntaxError("template source is not valid UTF-8", {1, 1});
    TemplateAst ast;
    ast.kind = kind_;
    top_ = &ast;
    BlockEnd end = parse_block(ast.nodes, /*depth=*/0);
    if (!end.tag.empty())
      throw SyntaxError("unexpected '{% " + end.tag + " %}'", end.loc);
    if (kind_ == SourceKind::FullPrompt && !ast.separator)
      throw SeparatorError("template has no top-level '|||' separator",
                           loc_at(src_.size()));
    ast.choice_sites = choice_sites_;
    return ast;
  }

 private:
  SourceLoc loc_at(std::size_t offset) const {
    auto it = std::upper_bound(line_starts_.begin(), line_starts_.end(), offset);
    const std::size_t line = static_cast<std::size_t>(it - line_starts_.begin());
    return {line, offset - line_starts_[line - 1] + 1};
  }

  [[noreturn]] void fail(const std::string& msg, std::size_t offset) const {
    throw SyntaxError(msg, loc_at(offset));
  }

  // ---------------------------------------------------------------- text

  void push_text(NodeList& nodes, std::string_view text, std::size_t offset,
                 bool at_top) {
    if (text.empty()) return;
    const bool boundary =
        at_top && top_->separator && *top_->separator == nodes.size();
    if (!nodes.empty() && !boundary) {
      if (auto* prev = std::get_if<TextNode>(&nodes.back().node)) {
        prev->text.append(text);
        return;
      }
    }
    nodes.push_back(Node{TextNode{std::string(text)}, loc_at(offset)});
  }

  void add_text(NodeList& nodes, std::string_view text, std::size_t offset,
                int depth, bool raw) {
    std::size_t start = 0;
    for (;;) {
      const auto hit = text.find(kSeparator, start);
      if (hit == std::string_view::npos) break;
      const std::size_t abs = offset + hit;
      if (depth > 0)
        throw SeparatorError("'|||' separator inside control flow", loc_at(abs));
      if (kind_ == SourceKind::Fragment) {
        // Choice separators in a fragment are ordinary text.
        start = hit + kSeparator.size();
        continue;
      }
      if (raw)
        throw SeparatorError("'|||' separator inside a raw block", loc_at(abs));
      push_text(nodes, text.substr(0, hit), offset, true);
      if (top_->separator)
        throw SeparatorError("template has more than one top-level '|||' separator",
                             loc_at(abs));
      top_->separator = nodes.size();
      const std::size_t skip = hit + kSeparator.size();
      offset += skip;
      text.remove_prefix(skip);
      start = 0;
    }
    push_text(nodes, text, offset, depth == 0);
  }

  // Parses nodes until a block-closing tag or EOF.
  BlockEnd parse_block(NodeList& nodes, int depth) {
    for (;;) {
      std::size_t next = std::string_view::npos;
      for (auto open : {"{{", "{%", "{#"}) next = std::min(next, src_.find(open, pos_));
      if (next == std::string_view::npos) {
        add_text(nodes, src_.substr(pos_), pos_, depth, false);
        pos_ = src_.size();
        return {};
      }
      add_text(nodes, src_.substr(pos_, next - pos_), pos_, depth, false);
      pos_ = next;
      const char kind = src_[next + 1];
      if (kind == '#') {
        const auto close = src_.find("#}", next + 2);
        if (close == std::string_view::npos) fail("unterminated comment", next);
        pos_ = close + 2;
      } else if (kind == '{') {
        pos_ += 2;
        const SourceLoc loc = loc_at(next);
        ExprPtr e = parse_expr();
        expect_end("}}");
        nodes.push_back(Node{SubstNode{std::move(e)}, loc});
      } else {
        pos_ += 2;
        if (auto end = parse_statement(nodes, depth, next); !end.tag.empty())
          return end;
      }
    }
  }

  BlockEnd parse_statement(NodeList& nodes, int depth, std::size_t tag_offset) {
    const SourceLoc loc = loc_at(tag_offset);
    Token kw = next_token();
    if (kw.type != Tok::Ident) fail("expected statement keyword, found " + describe(kw), kw.offset);

    if (kw.text == "if") {
      IfNode node;
      ExprPtr cond = parse_expr();
      expect_end("%}");
      IfNode::Branch branch{std::move(cond), {}};
      for (;;) {
        BlockEnd end = parse_block(branch.body, depth + 1);
        if (end.tag.empty()) fail("unterminated 'if' (missing '{% endif %}')", tag_offset);
        if (end.tag == "elif") {
          node.branches.push_back(std::move(branch));
          branch = IfNode::Branch{std::move(end.condition), {}};
          continue;
        }
        node.branches.push_back(std::move(branch));
        if (end.tag == "else") {
          NodeList else_body;
          BlockEnd close = parse_block(else_body, depth + 1);
          if (close.tag != "endif") {
            if (close.tag.empty()) fail("unterminated 'if' (missing '{% endif %}')", tag_offset);
            throw SyntaxError("expected '{% endif %}', found '{% " + close.tag + " %}'", close.loc);
          }
          node.else_body = std::move(else_body);
        } else if (end.tag != "endif") {
          throw SyntaxError("expected '{% endif %}', found '{% " + end.tag + " %}'", end.loc);
        }
        break;
      }
      nodes.push_back(Node{std::move(node), loc});
      return {};
    }

    if (kw.text == "for") {
      Token var = next_token();
      if (var.type != Tok::Ident || is_reserved(var.text))
        fail("expected loop variable, found " + describe(var), var.offset);
      Token in = next_token();
      if (in.type != Tok::Ident || in.text != "in")
        fail("expected 'in', found " + describe(in), in.offset);
      ForNode node;
      node.var = var.text;
      node.iterable = parse_expr();
      expect_end("%}");
      BlockEnd end = parse_block(node.body, depth + 1);
      if (end.tag.empty()) fail("unterminated 'for' (missing '{% endfor %}')", tag_offset);
      if (end.tag != "endfor")
        throw SyntaxError("expected '{% endfor %}', found '{% " + end.tag + " %}'", end.loc);
      nodes.push_back(Node{std::move(node), loc});
      return {};
    }

    if (kw.text == "set") {
      Token name = next_token();
      if (name.type != Tok::Ident || is_reserved(name.text))
        fail("expected variable name, found " + describe(name), name.offset);
      expect_punct("=");
      SetNode node{name.text, parse_expr()};
      expect_end("%}");
      if (!set_names_.insert(name.text).second)
        fail("variable '" + name.text + "' is already set; template variables are immutable",
             name.offset);
      nodes.push_back(Node{std::move(node), loc});
      return {};
    }

    if (kw.text == "raw") {
      expect_end("%}");
      std::size_t search = pos_;
      for (;;) {
        const auto open = src_.find("{%", search);
        if (open == std::string_view::npos) fail("unterminated 'raw' block", tag_offset);
        std::size_t p = open + 2;
        while (p < src_.size() && is_ascii_space(src_[p])) ++p;
        if (src_.compare(p, 6, "endraw") == 0) {
          std::size_t q = p + 6;
          while (q < src_.size() && is_ascii_space(src_[q])) ++q;
          if (src_.compare(q, 2, "%}") == 0) {
            add_text(nodes, src_.substr(pos_, open - pos_), pos_, depth, true);
            pos_ = q + 2;
            return {};
          }
        }
        search = open + 2;
      }
    }

    if (kw.text == "elif") {
      ExprPtr cond = parse_expr();
      expect_end("%}");
      return {"elif", std::move(cond), loc};
    }
    if (kw.text == "else" || kw.text == "endif" || kw.text == "endfor") {
      expect_end("%}");
      return {kw.text, nullptr, loc};
    }
    fail("unknown statement '" + kw.text + "'", kw.offset);
  }

  // ---------------------------------------------------------------- lexer

  void skip_space() {
    while (pos_ < src_.size() && is_ascii_space(src_[pos_])) ++pos_;
  }

  Token lex() {
    skip_space();
    Token t;
    t.offset = pos_;
    if (pos_ >= src_.size()) return t;
    const char c = src_[pos_];
    if (is_ident_start(c)) {
      std::size_t e = pos_;
      while (e < src_.size() && is_ident_char(src_[e])) ++e;
      t.type = Tok::Ident;
      t.text = std::string(src_.substr(pos_, e - pos_));
      pos_ = e;
      return t;
    }
    if (is_digit(c)) {
      std::size_t e = pos_;
      while (e < src_.size() && is_digit(src_[e])) ++e;
      t.type = Tok::Int;
      t.text = std::string(src_.substr(pos_, e - pos_));
      pos_ = e;
      return t;
    }
    if (c == '"' || c == '\'') {
      t.type = Tok::String;
      std::size_t p = pos_ + 1;
      for (;;) {
        if (p >= src_.size()) fail("unterminated string literal", pos_);
        const char d = src_[p];
        if (d == c) break;
        if (d == '\\' && p + 1 < src_.size()) {
          const char esc = src_[p + 1];
          switch (esc) {
            case 'n': t.text += '\n'; break;
            case 't': t.text += '\t'; break;
            case 'r': t.text += '\r'; break;
            case '\\': t.text += '\\'; break;
            case '"': t.text += '"'; break;
            case '\'': t.text += '\''; break;
            default:
              t.text += '\\';
              t.text += esc;
          }
          p += 2;
          continue;
        }
        t.text += d;
        ++p;
      }
      pos_ = p + 1;
      return t;
    }
    auto starts = [&](std::string_view s) { return src_.compare(pos_, s.size(), s) == 0; };
    for (std::string_view end : {"}}", "%}"}) {
      if (starts(end)) {
        t.type = Tok::End;
        t.text = std::string(end);
        pos_ += 2;
        return t;
      }
    }
    for (std::string_view op : {"==", "!=", "<=", ">="}) {
      if (starts(op)) {
        t.type = Tok::Punct;
        t.text = std::string(op);
        pos_ += 2;
        return t;
      }
    }
    if (std::string_view("()[].,:|<>+-=").find(c) != std::string_view::npos) {
      t.type = Tok::Punct;
      t.text = std::string(1, c);
      ++pos_;
      return t;
    }
    fail(std::string("unexpected character '") + c + "'", pos_);
  }

  Token peek() {
    const std::size_t saved = pos_;
    Token t = lex();
    pos_ = saved;
    return t;
  }
  Token next_token() { return lex(); }

  bool peek_punct(std::string_view p) {
    Token t = peek();
    return t.type == Tok::Punct && t.text == p;
  }
  bool peek_ident(std::string_view kw) {
    Token t = peek();
    return t.type == Tok::Ident && t.text == kw;
  }
  void expect_punct(std::string_view p) {
    Token t = next_token();
    if (t.type != Tok::Punct || t.text != p)
      fail("expected '" + std::string(p) + "', found " + describe(t), t.offset);
  }
  void expect_end(std::string_view end) {
    Token t = next_token();
    if (t.type != Tok::End || t.text != end)
      fail("expected '" + std::string(end) + "', found " + describe(t), t.offset);
  }

  // ---------------------------------------------------------------- exprs

  template <class T>
  ExprPtr make(T node, std::size_t offset) {
    return std::make_shared<const Expr>(Expr{std::move(node), loc_at(offset)});
  }

  ExprPtr parse_expr() {
    const std::size_t start = peek().offset;
    ExprPtr value = parse_or();
    if (peek_ident("if")) {
      next_token();
      ExprPtr cond = parse_or();
      Token kw = next_token();
      if (kw.type != Tok::Ident || kw.text != "else")
        fail("expected 'else' in conditional expression, found " + describe(kw), kw.offset);
      ExprPtr other = parse_expr();
      return make(CondExpr{std::move(value), std::move(cond), std::move(other)}, start);
    }
    return value;
  }

  ExprPtr parse_or() {
    const std::size_t start = peek().offset;
    ExprPtr lhs = parse_and();
    while (peek_ident("or")) {
      next_token();
      lhs = make(BinaryExpr{BinaryOp::Or, std::move(lhs), parse_and()}, start);
    }
    return lhs;
  }

  ExprPtr parse_and() {
    const std::size_t start = peek().offset;
    ExprPtr lhs = parse_not();
    while (peek_ident("and")) {
      next_token();
      lhs = make(BinaryExpr{BinaryOp::And, std::move(lhs), parse_not()}, start);
    }
    return lhs;
  }

  ExprPtr parse_not() {
    if (peek_ident("not")) {
      const std::size_t start = next_token().offset;
      return make(NotExpr{parse_not()}, start);
    }
    return parse_comparison();
  }

  ExprPtr parse_comparison() {
    const std::size_t start = peek().offset;
    ExprPtr lhs = parse_additive();
    Token t = peek();
    if (t.type != Tok::Punct) return lhs;
    BinaryOp op;
    if (t.text == "==") op = BinaryOp::Eq;
    else if (t.text == "!=") op = BinaryOp::Ne;
    else if (t.text == "<") op = BinaryOp::Lt;
    else if (t.text == "<=") op = BinaryOp::Le;
    else if (t.text == ">") op = BinaryOp::Gt;
    else if (t.text == ">=") op = BinaryOp::Ge;
    else return lhs;
    next_token();
    return make(BinaryExpr{op, std::move(lhs), parse_additive()}, start);
  }

  ExprPtr parse_additive() {
    const std::size_t start = peek().offset;
    ExprPtr lhs = parse_filtered();
    for (;;) {
      if (peek_punct("+")) {
        next_token();
        lhs = make(BinaryExpr{BinaryOp::Add, std::move(lhs), parse_filtered()}, start);
      } else if (peek_punct("-")) {
        next_token();
        lhs = make(BinaryExpr{BinaryOp::Sub, std::move(lhs), parse_filtered()}, start);
      } else {
        return lhs;
      }
    }
  }

  std::vector<FilterArg> parse_call_args() {
    std::vector<FilterArg> args;
    expect_punct("(");
    if (peek_punct(")")) {
      next_token();
      return args;
    }
    for (;;) {
      FilterArg arg;
      // keyword argument: ident '=' expr
      const std::size_t saved = pos_;
      Token t = next_token();
      if (t.type == Tok::Ident && peek_punct("=")) {
        next_token();
        arg.keyword = t.text;
      } else {
        pos_ = saved;
      }
      arg.value = parse_expr();
      args.push_back(std::move(arg));
      Token sep = next_token();
      if (sep.type == Tok::Punct && sep.text == ")") return args;
      if (sep.type != Tok::Punct || sep.text != ",")
        fail("expected ',' or ')', found " + describe(sep), sep.offset);
    }
  }

  ExprPtr parse_filtered() {
    ExprPtr subject = parse_postfix();
    while (peek_punct("|")) {
      next_token();
      Token name = next_token();
      if (name.type != Tok::Ident) fail("expected filter name, found " + describe(name), name.offset);
      // Site numbering follows the position of the `choice` token; arguments
      // come after it in the source.
      FilterExpr f{std::move(subject), name.text, {}, -1};
      if (f.name == "choice") f.choice_site = choice_sites_++;
      if (peek_punct("(")) f.args = parse_call_args();
      subject = make(std::move(f), name.offset);
    }
    return subject;
  }

  // Rewrites `obj.method(args)` into a filter application.
  ExprPtr method_call(ExprPtr object, const Token& method) {
    std::vector<FilterArg> args = parse_call_args();
    const std::string& m = method.text;
    if (m == "join") {
      if (args.size() != 1 || !args[0].keyword.empty())
        fail("join() takes exactly one positional argument", method.offset);
      ExprPtr list = args[0].value;
      std::vector<FilterArg> filter_args{FilterArg{"", std::move(object)}};
      return make(FilterExpr{std::move(list), "join", std::move(filter_args), -1},
                  method.offset);
    }
    static const std::set<std::string, std::less<>> kDirect = {
        "lower", "upper", "capitalize", "replace", "split", "index"};
    std::string filter = m;
    if (m == "strip") filter = "trim";
    else if (!kDirect.count(m)) fail("unsupported method '" + m + "()'", method.offset);
    return make(FilterExpr{std::move(object), filter, std::move(args), -1}, method.offset);
  }

  ExprPtr parse_postfix() {
    const std::size_t start = peek().offset;
    ExprPtr e = parse_primary();
    for (;;) {
      if (peek_punct(".")) {
        next_token();
        Token name = next_token();
        if (name.type != Tok::Ident) fail("expected attribute name, found " + describe(name), name.offset);
        if (peek_punct("(")) {
          e = method_call(std::move(e), name);
        } else {
          e = make(AttrExpr{std::move(e), name.text}, start);
        }
      } else if (peek_punct("[")) {
        next_token();
        ExprPtr first;
        if (!peek_punct(":")) first = parse_expr();
        if (peek_punct(":")) {
          next_token();
          ExprPtr stop;
          if (!peek_punct("]")) stop = parse_expr();
          expect_punct("]");
          e = make(SliceExpr{std::move(e), std::move(first), std::move(stop)}, start);
        } else {
          expect_punct("]");
          e = make(IndexExpr{std::move(e), std::move(first)}, start);
        }
      } else {
        return e;
      }
    }
  }

  Value parse_int(const Token& t, bool negative) {
    std::int64_t v = 0;
    std::string digits = negative ? "-" + t.text : t.text;
    auto res = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (res.ec != std::errc{}) fail("integer literal out of range", t.offset);
    return Value(v);
  }

  ExprPtr parse_primary() {
    Token t = next_token();
    switch (t.type) {
      case Tok::Int:
        return make(LiteralExpr{parse_int(t, false)}, t.offset);
      case Tok::String:
        return make(LiteralExpr{Value(t.text)}, t.offset);
      case Tok::Ident:
        if (is_reserved(t.text)) fail("unexpected keyword '" + t.text + "'", t.offset);
        return make(NameRef{t.text}, t.offset);
      case Tok::Punct:
        if (t.text == "(") {
          ExprPtr inner = parse_expr();
          expect_punct(")");
          return inner;
        }
        if (t.text == "[") {
          ListExpr list;
          if (!peek_punct("]")) {
            for (;;) {
              list.items.push_back(parse_expr());
              Token sep = next_token();
              if (sep.type == Tok::Punct && sep.text == "]") break;
              if (sep.type != Tok::Punct || sep.text != ",")
                fail("expected ',' or ']', found " + describe(sep), sep.offset);
              if (peek_punct("]")) {  // trailing comma
                next_token();
                break;
              }
            }
          } else {
            next_token();
          }
          return make(std::move(list), t.offset);
        }
        if (t.text == "-") {
          Token num = next_token();
          if (num.type != Tok::Int) fail("expected integer after '-', found " + describe(num), num.offset);
          return make(LiteralExpr{parse_int(num, true)}, t.offset);
        }
        break;
      default:
        break;
    }
    fail("expected expression, found " + describe(t), t.offset);
  }

  std::string_view src_;
  SourceKind kind_;
  std::vector<std::size_t> line_starts_;
  std::size_t pos_ = 0;
  TemplateAst* top_ = nullptr;
  int choice_sites_ = 0;
  std::set<std::string> set_names_;
};

// ------------------------------------------------------------------ equality

bool eq(const ExprPtr& a, const ExprPtr& b) {
  if (!a || !b) return !a && !b;
  return *a == *b;
}

bool eq_list(const NodeList& a, const NodeList& b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

}  // namespace

bool is_ascii_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim_ascii(std::string_view s) noexcept {
  while (!s.empty() && is_ascii_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_ascii_space(s.back())) s.remove_suffix(1);
  return s;
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.node.index() != b.node.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b.node);
        if constexpr (std::is_same_v<T, NameRef>) {
          return x.name == y.name;
        } else if constexpr (std::is_same_v<T, LiteralExpr>) {
          return x.value == y.value;
        } else if constexpr (std::is_same_v<T, ListExpr>) {
          return x.items.size() == y.items.size() &&
                 std::equal(x.items.begin(), x.items.end(), y.items.begin(), eq);
        } else if constexpr (std::is_same_v<T, AttrExpr>) {
          return x.attr == y.attr && eq(x.object, y.object);
        } else if constexpr (std::is_same_v<T, IndexExpr>) {
          return eq(x.object, y.object) && eq(x.index, y.index);
        } else if constexpr (std::is_same_v<T, SliceExpr>) {
          return eq(x.object, y.object) && eq(x.start, y.start) && eq(x.stop, y.stop);
        } else if constexpr (std::is_same_v<T, BinaryExpr>) {
          return x.op == y.op && eq(x.lhs, y.lhs) && eq(x.rhs, y.rhs);
        } else if constexpr (std::is_same_v<T, NotExpr>) {
          return eq(x.operand, y.operand);
        } else if constexpr (std::is_same_v<T, CondExpr>) {
          return eq(x.then_value, y.then_value) && eq(x.condition, y.condition) &&
                 eq(x.else_value, y.else_value);
        } else {
          if (x.name != y.name || x.choice_site != y.choice_site ||
              x.args.size() != y.args.size() || !eq(x.subject, y.subject))
            return false;
          for (std::size_t i = 0; i < x.args.size(); ++i)
            if (x.args[i].keyword != y.args[i].keyword || !eq(x.args[i].value, y.args[i].value))
              return false;
          return true;
        }
      },
      a.node);
}

bool operator==(const Node& a, const Node& b) {
  if (a.node.index() != b.node.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b.node);
        if constexpr (std::is_same_v<T, TextNode>) {
          return x.text == y.text;
        } else if constexpr (std::is_same_v<T, SubstNode>) {
          return eq(x.expr, y.expr);
        } else if constexpr (std::is_same_v<T, IfNode>) {
          if (x.branches.size() != y.branches.size()) return false;
          for (std::size_t i = 0; i < x.branches.size(); ++i)
            if (!eq(x.branches[i].condition, y.branches[i].condition) ||
                !eq_list(x.branches[i].body, y.branches[i].body))
              return false;
          if (x.else_body.has_value() != y.else_body.has_value()) return false;
          return !x.else_body || eq_list(*x.else_body, *y.else_body);
        } else if constexpr (std::is_same_v<T, ForNode>) {
          return x.var == y.var && eq(x.iterable, y.iterable) && eq_list(x.body, y.body);
        } else {
          return x.name == y.name && eq(x.value, y.value);
        }
      },
      a.node);
}

bool operator==(const TemplateAst& a, const TemplateAst& b) {
  return a.kind == b.kind && a.separator == b.separator &&
         a.choice_sites == b.choice_sites && eq_list(a.nodes, b.nodes);
}

TemplateAst parse(const TemplateSource& source) {
  return Parser(source.text, source.kind).run();
}

TemplateAst parse(std::string_view text, SourceKind kind) {
  return Parser(text, kind).run();
}

}  // namespace promptforge::tmpl
