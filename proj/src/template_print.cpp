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

#include "promptforge/template_lang.hpp"

namespace promptforge::tmpl {

namespace {

// Binding strength, loosest first.
enum Prec : int {
  kCond = 0,
  kOr,
  kAnd,
  kNot,
  kCompare,
  kAdditive,
  kFilter,
  kPostfix,
  kPrimary,
};

int binary_prec(BinaryOp op) {
  switch (op) {
    case BinaryOp::Or: return kOr;
    case BinaryOp::And: return kAnd;
    case BinaryOp::Add:
    case BinaryOp::Sub: return kAdditive;
    default: return kCompare;
  }
}

const char* binary_token(BinaryOp op) {
  switch (op) {
    case BinaryOp::Eq: return "==";
    case BinaryOp::Ne: return "!=";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::And: return "and";
    case BinaryOp::Or: return "or";
  }
  return "?";
}

int prec_of(const Expr& e) {
  return std::visit(
      [](const auto& x) -> int {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, CondExpr>) return kCond;
        else if constexpr (std::is_same_v<T, BinaryExpr>) return binary_prec(x.op);
        else if constexpr (std::is_same_v<T, NotExpr>) return kNot;
        else if constexpr (std::is_same_v<T, FilterExpr>) return kFilter;
        else if constexpr (std::is_same_v<T, AttrExpr> || std::is_same_v<T, IndexExpr> ||
                           std::is_same_v<T, SliceExpr>)
          return kPostfix;
        else return kPrimary;
      },
      e.node);
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  out += '"';
  return out;
}

void print_expr(std::string& out, const Expr& e, int min_prec);

void print_child(std::string& out, const ExprPtr& e, int min_prec) {
  print_expr(out, *e, min_prec);
}

void print_expr(std::string& out, const Expr& e, int min_prec) {
  const bool parens = prec_of(e) < min_prec;
  if (parens) out += '(';
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, NameRef>) {
          out += x.name;
        } else if constexpr (std::is_same_v<T, LiteralExpr>) {
          out += x.value.is_str() ? quote(x.value.as_str()) : to_display(x.value);
        } else if constexpr (std::is_same_v<T, ListExpr>) {
          out += '[';
          for (std::size_t i = 0; i < x.items.size(); ++i) {
            if (i) out += ", ";
            print_child(out, x.items[i], kCond);
          }
          out += ']';
        } else if constexpr (std::is_same_v<T, AttrExpr>) {
          print_child(out, x.object, kPostfix);
          out += '.';
          out += x.attr;
        } else if constexpr (std::is_same_v<T, IndexExpr>) {
          print_child(out, x.object, kPostfix);
          out += '[';
          print_child(out, x.index, kCond);
          out += ']';
        } else if constexpr (std::is_same_v<T, SliceExpr>) {
          print_child(out, x.object, kPostfix);
          out += '[';
          if (x.start) print_child(out, x.start, kCond);
          out += ':';
          if (x.stop) print_child(out, x.stop, kCond);
          out += ']';
        } else if constexpr (std::is_same_v<T, BinaryExpr>) {
          const int p = binary_prec(x.op);
          // Comparisons do not chain; both operands bind tighter.
          const int lhs_min = p == kCompare ? kAdditive : p;
          const int rhs_min = p == kCompare ? kAdditive : p + 1;
          print_child(out, x.lhs, lhs_min);
          out += ' ';
          out += binary_token(x.op);
          out += ' ';
          print_child(out, x.rhs, rhs_min);
        } else if constexpr (std::is_same_v<T, NotExpr>) {
          out += "not ";
          print_child(out, x.operand, kNot);
        } else if constexpr (std::is_same_v<T, CondExpr>) {
          print_child(out, x.then_value, kOr);
          out += " if ";
          print_child(out, x.condition, kOr);
          out += " else ";
          print_child(out, x.else_value, kCond);
        } else {
          print_child(out, x.subject, kFilter);
          out += " | ";
          out += x.name;
          if (!x.args.empty()) {
            out += '(';
            for (std::size_t i = 0; i < x.args.size(); ++i) {
              if (i) out += ", ";
              if (!x.args[i].keyword.empty()) {
                out += x.args[i].keyword;
                out += '=';
              }
              print_child(out, x.args[i].value, kCond);
            }
            out += ')';
          }
        }
      },
      e.node);
  if (parens) out += ')';
}

bool needs_raw(const std::string& text) {
  return text.find("{{") != std::string::npos || text.find("{%") != std::string::npos ||
         text.find("{#") != std::string::npos || (!text.empty() && text.back() == '{');
}

void print_nodes(std::string& out, const NodeList& nodes);

void print_node(std::string& out, const Node& n) {
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, TextNode>) {
          if (needs_raw(x.text)) {
            out += "{% raw %}";
            out += x.text;
            out += "{% endraw %}";
          } else {
            out += x.text;
          }
        } else if constexpr (std::is_same_v<T, SubstNode>) {
          out += "{{ ";
          print_expr(out, *x.expr, kCond);
          out += " }}";
        } else if constexpr (std::is_same_v<T, IfNode>) {
          for (std::size_t i = 0; i < x.branches.size(); ++i) {
            out += i == 0 ? "{% if " : "{% elif ";
            print_expr(out, *x.branches[i].condition, kCond);
            out += " %}";
            print_nodes(out, x.branches[i].body);
          }
          if (x.else_body) {
            out += "{% else %}";
            print_nodes(out, *x.else_body);
          }
          out += "{% endif %}";
        } else if constexpr (std::is_same_v<T, ForNode>) {
          out += "{% for " + x.var + " in ";
          print_expr(out, *x.iterable, kCond);
          out += " %}";
          print_nodes(out, x.body);
          out += "{% endfor %}";
        } else {
          out += "{% set " + x.name + " = ";
          print_expr(out, *x.value, kCond);
          out += " %}";
        }
      },
      n.node);
}

void print_nodes(std::string& out, const NodeList& nodes) {
  for (const auto& n : nodes) print_node(out, n);
}

}  // namespace

TemplateSource pretty_print(const TemplateAst& ast) {
  std::string out;
  for (std::size_t i = 0; i <= ast.nodes.size(); ++i) {
    if (ast.separator && *ast.separator == i) out += "|||";
    if (i < ast.nodes.size()) print_node(out, ast.nodes[i]);
  }
  return {std::move(out), ast.kind};
}

}  // namespace promptforge::tmpl
