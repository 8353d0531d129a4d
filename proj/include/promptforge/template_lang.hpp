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

// The prompt templating language: a Jinja subset with a top-level `|||`
// separating the input text from the target text.
//
//   text            literal text
//   {{ expr }}      substitution
//   {% if e %} .. {% elif e %} .. {% else %} .. {% endif %}
//   {% for x in e %} .. {% endfor %}
//   {% set x = e %}
//   {% raw %} .. {% endraw %}
//   {# comment #}
//
// Expressions: names, "string" / 'string' / int / [list] literals, a.b,
// a[e], a[i:j], == != < <= > >= + - and or not, `x if c else y`, and filters
// `e | f(args)`. Method sugar (`sep.join(xs)`, `s.lower()`, `s.split(" ")`,
// ...) is rewritten into the equivalent filter call at parse time.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "promptforge/errors.hpp"
#include "promptforge/value.hpp"

namespace promptforge::tmpl {

enum class SourceKind { FullPrompt, Fragment };

struct TemplateSource {
  std::string text;
  SourceKind kind = SourceKind::FullPrompt;
};

// ---------------------------------------------------------------------------
// Expressions

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct NameRef {
  std::string name;
};
struct LiteralExpr {
  Value value;  // Str or Int
};
struct ListExpr {
  std::vector<ExprPtr> items;
};
struct AttrExpr {
  ExprPtr object;
  std::string attr;
};
struct IndexExpr {
  ExprPtr object;
  ExprPtr index;
};
struct SliceExpr {
  ExprPtr object;
  ExprPtr start;  // null when omitted
  ExprPtr stop;   // null when omitted
};

enum class BinaryOp { Eq, Ne, Lt, Le, Gt, Ge, Add, Sub, And, Or };

struct BinaryExpr {
  BinaryOp op;
  ExprPtr lhs;
  ExprPtr rhs;
};
struct NotExpr {
  ExprPtr operand;
};
struct CondExpr {
  ExprPtr then_value;
  ExprPtr condition;
  ExprPtr else_value;
};

struct FilterArg {
  std::string keyword;  // empty for positional
  ExprPtr value;
};
struct FilterExpr {
  ExprPtr subject;
  std::string name;
  std::vector<FilterArg> args;
  int choice_site = -1;  // source-order ordinal for `choice`, else -1
};

struct Expr {
  std::variant<NameRef, LiteralExpr, ListExpr, AttrExpr, IndexExpr, SliceExpr,
               BinaryExpr, NotExpr, CondExpr, FilterExpr>
      node;
  SourceLoc loc;
};

// ---------------------------------------------------------------------------
// Statements

struct Node;
using NodeList = std::vector<Node>;

struct TextNode {
  std::string text;
};
struct SubstNode {
  ExprPtr expr;
};
struct IfNode {
  struct Branch {
    ExprPtr condition;
    NodeList body;
  };
  std::vector<Branch> branches;  // `if` followed by any `elif`s
  std::optional<NodeList> else_body;
};
struct ForNode {
  std::string var;
  ExprPtr iterable;
  NodeList body;
};
struct SetNode {
  std::string name;
  ExprPtr value;
};

struct Node {
  std::variant<TextNode, SubstNode, IfNode, ForNode, SetNode> node;
  SourceLoc loc;
};

/// Parsed template. For full prompts, nodes[0, separator) produce the input
/// and nodes[separator, end) produce the target.
struct TemplateAst {
  SourceKind kind = SourceKind::FullPrompt;
  NodeList nodes;
  std::optional<std::size_t> separator;
  int choice_sites = 0;
};

// Structural equality; source locations are ignored.
bool operator==(const Expr& a, const Expr& b);
bool operator==(const Node& a, const Node& b);
bool operator==(const TemplateAst& a, const TemplateAst& b);
inline bool operator!=(const TemplateAst& a, const TemplateAst& b) { return !(a == b); }

/// Throws SyntaxError or SeparatorError with a 1-based line/column.
TemplateAst parse(const TemplateSource& source);
TemplateAst parse(std::string_view text, SourceKind kind = SourceKind::FullPrompt);

/// Canonical source text; parse(pretty_print(ast)) == ast.
TemplateSource pretty_print(const TemplateAst& ast);

// ---------------------------------------------------------------------------
// Rendering

enum class ChoiceMode { Seeded, Enumerate };

struct RenderContext {
  Value example;  // Record of fields; Null means no fields
  std::uint64_t example_ordinal = 0;
  std::optional<std::vector<std::string>> answer_choices;
  std::uint64_t rng_seed = 0;
  ChoiceMode choice_mode = ChoiceMode::Seeded;
  std::uint64_t choice_index = 0;  // used in Enumerate mode
};

enum class SpanOrigin { Literal, Substitution };

struct Span {
  std::size_t start = 0;  // byte offsets, [start, end)
  std::size_t end = 0;
  SpanOrigin origin = SpanOrigin::Literal;
  friend bool operator==(const Span&, const Span&) = default;
};

const char* origin_name(SpanOrigin o) noexcept;

struct RenderedText {
  std::string text;
  std::vector<Span> spans;
  friend bool operator==(const RenderedText&, const RenderedText&) = default;
};

struct RenderedPrompt {
  std::string input;
  std::string target;
  std::vector<Span> spans_input;
  std::vector<Span> spans_target;
  bool skipped = false;
  friend bool operator==(const RenderedPrompt&, const RenderedPrompt&) = default;
};

/// Renders a full prompt. Input and target are each trimmed of surrounding
/// ASCII whitespace; skipped is set when either is empty afterwards.
RenderedPrompt render(const TemplateAst& ast, const RenderContext& ctx);

/// Renders a fragment (e.g. an answer-choices template) without trimming.
RenderedText render_fragment(const TemplateAst& ast, const RenderContext& ctx);

/// Number of `choice` combinations for this example in Enumerate mode: the
/// product of list lengths seen at each choice site (row-major, first site
/// most significant). 1 when the template has no choice sites.
std::uint64_t count_combinations(const TemplateAst& ast, const RenderContext& ctx);

bool is_ascii_space(char c) noexcept;
std::string_view trim_ascii(std::string_view s) noexcept;

}  // namespace promptforge::tmpl
