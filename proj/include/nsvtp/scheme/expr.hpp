#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nsvtp/error.hpp"
#include "nsvtp/scheme/lexer.hpp"

namespace nsvtp::scheme {

// Immutable arithmetic expression tree. Nodes are shared, never mutated, so
// copies of a Blueprint are cheap and safe to hand to other threads.
class Expr {
 public:
  enum class Op { Number, Ref, Neg, Add, Sub, Mul, Div, Pow };

  Expr() : Expr(number(0.0)) {}

  static Expr number(double v) { return Expr(std::make_shared<Node>(Node{Op::Number, v, {}, {}})); }
  static Expr ref(std::string name) {
    return Expr(std::make_shared<Node>(Node{Op::Ref, 0.0, std::move(name), {}}));
  }
  static Expr neg(Expr operand) {
    return Expr(std::make_shared<Node>(Node{Op::Neg, 0.0, {}, {std::move(operand)}}));
  }
  static Expr binary(Op op, Expr lhs, Expr rhs) {
    return Expr(std::make_shared<Node>(Node{op, 0.0, {}, {std::move(lhs), std::move(rhs)}}));
  }

  Op op() const { return node_->op; }
  double value() const { return node_->value; }
  const std::string& name() const { return node_->name; }
  const Expr& lhs() const { return node_->kids.at(0); }
  const Expr& rhs() const { return node_->kids.at(1); }
  const Expr& operand() const { return node_->kids.at(0); }

  bool operator==(const Expr& other) const {
    if (node_ == other.node_) return true;
    const auto& a = *node_;
    const auto& b = *other.node_;
    if (a.op != b.op) return false;
    switch (a.op) {
      case Op::Number: return a.value == b.value;
      case Op::Ref: return a.name == b.name;
      default: return a.kids == b.kids;
    }
  }

  void collect_refs(std::set<std::string>& out) const {
    if (op() == Op::Ref) out.insert(name());
    for (const auto& k : node_->kids) k.collect_refs(out);
  }

 private:
  struct Node {
    Op op;
    double value;
    std::string name;
    std::vector<Expr> kids;
  };

  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  std::shared_ptr<const Node> node_;
};

enum class RelOp { Less, LessEq, Greater, GreaterEq, Equal, NotEqual };

inline std::string_view relop_text(RelOp op) {
  switch (op) {
    case RelOp::Less: return "<";
    case RelOp::LessEq: return "<=";
    case RelOp::Greater: return ">";
    case RelOp::GreaterEq: return ">=";
    case RelOp::Equal: return "==";
    case RelOp::NotEqual: return "!=";
  }
  return "?";
}

struct Comparison {
  Expr lhs;
  RelOp op = RelOp::LessEq;
  Expr rhs;

  bool operator==(const Comparison&) const = default;
};

// Conjunction of comparisons.
struct Guard {
  std::vector<Comparison> terms;

  void collect_refs(std::set<std::string>& out) const {
    for (const auto& t : terms) {
      t.lhs.collect_refs(out);
      t.rhs.collect_refs(out);
    }
  }

  bool operator==(const Guard&) const = default;
};

using Lookup = std::function<double(const std::string&)>;

inline double checked(double v, const char* what) {
  if (!std::isfinite(v)) {
    fail(ErrorCode::NumericDomain, std::string("non-finite result from ") + what);
  }
  return v;
}

inline double evaluate(const Expr& e, const Lookup& lookup) {
  using Op = Expr::Op;
  switch (e.op()) {
    case Op::Number: return e.value();
    case Op::Ref: return lookup(e.name());
    case Op::Neg: return -evaluate(e.operand(), lookup);
    case Op::Add: return checked(evaluate(e.lhs(), lookup) + evaluate(e.rhs(), lookup), "'+'");
    case Op::Sub: return checked(evaluate(e.lhs(), lookup) - evaluate(e.rhs(), lookup), "'-'");
    case Op::Mul: return checked(evaluate(e.lhs(), lookup) * evaluate(e.rhs(), lookup), "'*'");
    case Op::Div: {
      const double num = evaluate(e.lhs(), lookup);
      const double den = evaluate(e.rhs(), lookup);
      if (den == 0.0) fail(ErrorCode::DivisionByZero, "division by zero");
      return checked(num / den, "'/'");
    }
    case Op::Pow: {
      const double base = evaluate(e.lhs(), lookup);
      const double exp = evaluate(e.rhs(), lookup);
      if (base == 0.0 && exp < 0.0) fail(ErrorCode::DivisionByZero, "zero raised to a negative power");
      return checked(std::pow(base, exp), "'^'");
    }
  }
  return 0.0;
}

inline bool evaluate(const Guard& g, const Lookup& lookup) {
  for (const auto& t : g.terms) {
    const double a = evaluate(t.lhs, lookup);
    const double b = evaluate(t.rhs, lookup);
    bool ok = false;
    switch (t.op) {
      case RelOp::Less: ok = a < b; break;
      case RelOp::LessEq: ok = a <= b; break;
      case RelOp::Greater: ok = a > b; break;
      case RelOp::GreaterEq: ok = a >= b; break;
      case RelOp::Equal: ok = a == b; break;
      case RelOp::NotEqual: ok = a != b; break;
    }
    if (!ok) return false;
  }
  return true;
}

// --- parsing --------------------------------------------------------------
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?
//   primary := NUMBER | IDENT | '(' expr ')'

inline Expr parse_expr(TokenStream& ts);

inline Expr parse_primary(TokenStream& ts) {
  const auto& t = ts.peek();
  if (t.kind == TokenKind::Number) return Expr::number(ts.next().number);
  if (t.kind == TokenKind::Identifier && !is_keyword(t.text)) return Expr::ref(ts.next().text);
  if (ts.accept_punct("(")) {
    auto inner = parse_expr(ts);
    ts.expect_punct(")");
    return inner;
  }
  ts.unexpected("number, identifier or '('");
}

inline Expr parse_unary(TokenStream& ts);

inline Expr parse_power(TokenStream& ts) {
  auto base = parse_primary(ts);
  if (ts.accept_punct("^")) return Expr::binary(Expr::Op::Pow, base, parse_unary(ts));
  return base;
}

inline Expr parse_unary(TokenStream& ts) {
  if (ts.accept_punct("-")) return Expr::neg(parse_unary(ts));
  return parse_power(ts);
}

inline Expr parse_term(TokenStream& ts) {
  auto lhs = parse_unary(ts);
  while (true) {
    if (ts.accept_punct("*")) {
      lhs = Expr::binary(Expr::Op::Mul, lhs, parse_unary(ts));
    } else if (ts.accept_punct("/")) {
      lhs = Expr::binary(Expr::Op::Div, lhs, parse_unary(ts));
    } else {
      return lhs;
    }
  }
}

inline Expr parse_expr(TokenStream& ts) {
  auto lhs = parse_term(ts);
  while (true) {
    // "->" lexes as one token, so a trailing arrow never reads as minus.
    if (ts.accept_punct("+")) {
      lhs = Expr::binary(Expr::Op::Add, lhs, parse_term(ts));
    } else if (ts.accept_punct("-")) {
      lhs = Expr::binary(Expr::Op::Sub, lhs, parse_term(ts));
    } else {
      return lhs;
    }
  }
}

inline Guard parse_guard(TokenStream& ts) {
  Guard g;
  do {
    Comparison c;
    c.lhs = parse_expr(ts);
    static constexpr std::pair<std::string_view, RelOp> ops[] = {
        {"<=", RelOp::LessEq}, {">=", RelOp::GreaterEq}, {"==", RelOp::Equal},
        {"!=", RelOp::NotEqual}, {"<", RelOp::Less}, {">", RelOp::Greater}};
    bool found = false;
    for (auto [text, op] : ops) {
      if (ts.accept_punct(text)) {
        c.op = op;
        found = true;
        break;
      }
    }
    if (!found) ts.unexpected("comparison operator");
    c.rhs = parse_expr(ts);
    g.terms.push_back(std::move(c));
  } while (ts.accept_keyword("and"));
  return g;
}

// --- printing -------------------------------------------------------------

namespace detail {

inline int precedence(Expr::Op op) {
  switch (op) {
    case Expr::Op::Add:
    case Expr::Op::Sub: return 1;
    case Expr::Op::Mul:
    case Expr::Op::Div: return 2;
    case Expr::Op::Neg: return 3;
    case Expr::Op::Pow: return 4;
    default: return 5;
  }
}

inline std::string wrap(const std::string& s, bool parens) {
  return parens ? "(" + s + ")" : s;
}

}  // namespace detail

// Minimal parentheses such that parse_expr(print_expr(e)) == e.
inline std::string print_expr(const Expr& e) {
  using Op = Expr::Op;
  using detail::precedence;
  using detail::wrap;
  const int p = precedence(e.op());
  switch (e.op()) {
    case Op::Number: return format_number(e.value());
    case Op::Ref: return e.name();
    case Op::Neg: return "-" + wrap(print_expr(e.operand()), precedence(e.operand().op()) < 3);
    case Op::Pow:
      return wrap(print_expr(e.lhs()), precedence(e.lhs().op()) <= p) + " ^ " +
             wrap(print_expr(e.rhs()), precedence(e.rhs().op()) < 3);
    default: {
      const char* sym = e.op() == Op::Add   ? " + "
                        : e.op() == Op::Sub ? " - "
                        : e.op() == Op::Mul ? " * "
                                            : " / ";
      return wrap(print_expr(e.lhs()), precedence(e.lhs().op()) < p) + sym +
             wrap(print_expr(e.rhs()), precedence(e.rhs().op()) <= p);
    }
  }
}

inline std::string print_guard(const Guard& g) {
  std::string out;
  for (std::size_t i = 0; i < g.terms.size(); ++i) {
    if (i) out += " and ";
    out += print_expr(g.terms[i].lhs) + " " + std::string(relop_text(g.terms[i].op)) + " " +
           print_expr(g.terms[i].rhs);
  }
  return out;
}

}  // namespace nsvtp::scheme
