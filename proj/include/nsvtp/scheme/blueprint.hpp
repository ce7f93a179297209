#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "nsvtp/error.hpp"
#include "nsvtp/scheme/expr.hpp"
#include "nsvtp/scheme/lexer.hpp"

namespace nsvtp::scheme {

// Reserved name of the scheme that describes the status segment vocabulary.
inline constexpr std::string_view kStatusSchemeName = "status";

struct FiniteSet {
  std::vector<double> values;  // sorted, unique

  bool operator==(const FiniteSet&) const = default;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool operator==(const Interval&) const = default;
};

class FeasibleSet {
 public:
  FeasibleSet() : FeasibleSet(Interval{0.0, 0.0}) {}

  static FeasibleSet finite(std::vector<double> values) {
    if (values.empty()) fail(ErrorCode::InvalidFeasibleSet, "finite feasible set is empty");
    for (double v : values) {
      if (!std::isfinite(v)) fail(ErrorCode::InvalidFeasibleSet, "feasible value is not finite");
    }
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    // -0.0 and 0.0 compare equal; keep the canonical +0.0
    for (auto& v : values) {
      if (v == 0.0) v = 0.0;
    }
    return FeasibleSet(FiniteSet{std::move(values)});
  }

  static FeasibleSet interval(double lo, double hi) {
    if (!std::isfinite(lo) || !std::isfinite(hi)) {
      fail(ErrorCode::InvalidFeasibleSet, "interval bound is not finite");
    }
    if (lo > hi) {
      fail(ErrorCode::InvalidFeasibleSet,
           "interval [" + format_number(lo) + ", " + format_number(hi) + "] has lo > hi");
    }
    return FeasibleSet(Interval{lo, hi});
  }

  bool is_finite() const { return std::holds_alternative<FiniteSet>(set_); }
  const FiniteSet& as_finite() const { return std::get<FiniteSet>(set_); }
  const Interval& as_interval() const { return std::get<Interval>(set_); }

  // Exact membership for finite sets, inclusive endpoints for intervals.
  bool contains(double v) const {
    if (!std::isfinite(v)) return false;
    if (is_finite()) {
      const auto& vals = as_finite().values;
      return std::binary_search(vals.begin(), vals.end(), v);
    }
    return as_interval().lo <= v && v <= as_interval().hi;
  }

  // True when every member of `other` is a member of this set.
  bool includes(const FeasibleSet& other) const {
    if (other.is_finite()) {
      return std::all_of(other.as_finite().values.begin(), other.as_finite().values.end(),
                         [&](double v) { return contains(v); });
    }
    if (is_finite()) {
      const auto& iv = other.as_interval();
      return iv.lo == iv.hi && contains(iv.lo);
    }
    return as_interval().lo <= other.as_interval().lo &&
           other.as_interval().hi <= as_interval().hi;
  }

  std::string print() const {
    if (is_finite()) {
      std::string out = "{";
      const auto& vals = as_finite().values;
      for (std::size_t i = 0; i < vals.size(); ++i) {
        if (i) out += ", ";
        out += format_number(vals[i]);
      }
      return out + "}";
    }
    return "[" + format_number(as_interval().lo) + ", " + format_number(as_interval().hi) + "]";
  }

  bool operator==(const FeasibleSet&) const = default;

 private:
  explicit FeasibleSet(std::variant<FiniteSet, Interval> s) : set_(std::move(s)) {}

  std::variant<FiniteSet, Interval> set_;
};

struct ParamSpec {
  std::string name;
  FeasibleSet feasible;
  std::string unit;  // free-text tag, may be empty

  bool operator==(const ParamSpec&) const = default;
};

// Model symbol such as P0 or f_max. A constant without a value must be
// supplied by the caller at evaluation time.
struct ConstantSpec {
  std::string name;
  std::optional<double> value;
  std::string unit;

  bool operator==(const ConstantSpec&) const = default;
};

struct Formula {
  std::string name;
  std::optional<Guard> guard;
  Expr body;
  std::string outcome;

  bool operator==(const Formula&) const = default;
};

struct Scheme {
  std::string name;
  std::vector<ParamSpec> params;
  std::vector<ConstantSpec> constants;
  std::vector<std::string> outcomes;
  std::vector<Formula> formulas;

  const ParamSpec* find_param(std::string_view n) const {
    for (const auto& p : params) {
      if (p.name == n) return &p;
    }
    return nullptr;
  }
  const ConstantSpec* find_constant(std::string_view n) const {
    for (const auto& c : constants) {
      if (c.name == n) return &c;
    }
    return nullptr;
  }
  const Formula* find_formula(std::string_view n) const {
    for (const auto& f : formulas) {
      if (f.name == n) return &f;
    }
    return nullptr;
  }
  bool has_outcome(std::string_view n) const {
    return std::find(outcomes.begin(), outcomes.end(), n) != outcomes.end();
  }

  bool operator==(const Scheme&) const = default;
};

struct Blueprint {
  std::string model;  // component-model tag
  long revision = 1;
  std::vector<Scheme> schemes;

  const Scheme* find_scheme(std::string_view n) const {
    for (const auto& s : schemes) {
      if (s.name == n) return &s;
    }
    return nullptr;
  }
  const Scheme* status_scheme() const { return find_scheme(kStatusSchemeName); }

  bool operator==(const Blueprint&) const = default;
};

// Checks name uniqueness and that formulas only reference declared symbols.
inline void validate_scheme(const Scheme& s) {
  std::set<std::string> names;
  auto claim = [&](const std::string& n, std::string_view kind) {
    if (!names.insert(n).second) {
      fail(ErrorCode::DuplicateName,
           "scheme '" + s.name + "': " + std::string(kind) + " '" + n +
               "' reuses a name already declared in this scheme");
    }
  };
  for (const auto& p : s.params) claim(p.name, "param");
  for (const auto& c : s.constants) claim(c.name, "const");
  for (const auto& o : s.outcomes) claim(o, "outcome");
  for (const auto& f : s.formulas) claim(f.name, "formula");

  for (const auto& f : s.formulas) {
    std::set<std::string> refs;
    f.body.collect_refs(refs);
    if (f.guard) f.guard->collect_refs(refs);
    for (const auto& r : refs) {
      if (!s.find_param(r) && !s.find_constant(r)) {
        fail(ErrorCode::UnknownIdentifier,
             "formula '" + s.name + "." + f.name + "' references undeclared symbol '" + r + "'");
      }
    }
    if (!s.has_outcome(f.outcome)) {
      fail(ErrorCode::UnknownIdentifier,
           "formula '" + s.name + "." + f.name + "' targets undeclared outcome '" + f.outcome +
               "'");
    }
  }
}

inline void validate_blueprint(const Blueprint& b) {
  std::set<std::string> names;
  for (const auto& s : b.schemes) {
    if (!names.insert(s.name).second) {
      fail(ErrorCode::DuplicateName, "scheme '" + s.name + "' declared twice");
    }
    validate_scheme(s);
  }
}

// --- parsing --------------------------------------------------------------
//
//   blueprint "MODEL" rev N {
//     scheme NAME {
//       param NAME : {v1, v2, ...} [UNIT];
//       param NAME : [lo, hi] [UNIT];
//       const NAME [= VALUE] [UNIT];
//       outcome NAME;
//       formula NAME [when GUARD] : EXPR -> OUTCOME;
//     }
//   }

namespace detail {

inline std::string parse_optional_unit(TokenStream& ts) {
  const auto& t = ts.peek();
  if (t.kind == TokenKind::String) return ts.next().text;
  if (t.kind == TokenKind::Identifier && !is_keyword(t.text)) return ts.next().text;
  return {};
}

inline FeasibleSet parse_feasible(TokenStream& ts) {
  if (ts.accept_punct("{")) {
    std::vector<double> vals;
    if (!ts.is_punct("}")) {
      do {
        vals.push_back(ts.expect_signed_number());
      } while (ts.accept_punct(","));
    }
    const auto pos = ts.peek().pos;
    ts.expect_punct("}");
    if (vals.empty()) syntax_error(pos, "finite feasible set must not be empty");
    return FeasibleSet::finite(std::move(vals));
  }
  if (ts.accept_punct("[")) {
    const double lo = ts.expect_signed_number();
    ts.expect_punct(",");
    const double hi = ts.expect_signed_number();
    ts.expect_punct("]");
    return FeasibleSet::interval(lo, hi);
  }
  ts.unexpected("'{' or '[' starting a feasible set");
}

inline Scheme parse_scheme_body(TokenStream& ts, std::string name) {
  Scheme s;
  s.name = std::move(name);
  ts.expect_punct("{");
  while (!ts.accept_punct("}")) {
    if (ts.accept_keyword("param")) {
      ParamSpec p;
      p.name = ts.expect_identifier("parameter name");
      ts.expect_punct(":");
      p.feasible = parse_feasible(ts);
      p.unit = parse_optional_unit(ts);
      ts.expect_punct(";");
      s.params.push_back(std::move(p));
    } else if (ts.accept_keyword("const")) {
      ConstantSpec c;
      c.name = ts.expect_identifier("constant name");
      if (ts.accept_punct("=")) c.value = ts.expect_signed_number();
      c.unit = parse_optional_unit(ts);
      ts.expect_punct(";");
      s.constants.push_back(std::move(c));
    } else if (ts.accept_keyword("outcome")) {
      s.outcomes.push_back(ts.expect_identifier("outcome name"));
      ts.expect_punct(";");
    } else if (ts.accept_keyword("formula")) {
      Formula f;
      f.name = ts.expect_identifier("formula name");
      if (ts.accept_keyword("when")) f.guard = parse_guard(ts);
      ts.expect_punct(":");
      f.body = parse_expr(ts);
      ts.expect_punct("->");
      f.outcome = ts.expect_identifier("outcome name");
      ts.expect_punct(";");
      s.formulas.push_back(std::move(f));
    } else {
      ts.unexpected("'param', 'const', 'outcome', 'formula' or '}'");
    }
  }
  return s;
}

}  // namespace detail

inline Blueprint parse_blueprint(std::string_view text) {
  TokenStream ts(text);
  Blueprint b;
  ts.expect_keyword("blueprint");
  const auto& tag = ts.peek();
  if (tag.kind != TokenKind::String) ts.unexpected("quoted component-model tag");
  b.model = ts.next().text;
  ts.expect_keyword("rev");
  if (ts.peek().kind != TokenKind::Number) ts.unexpected("revision number");
  const auto& rev = ts.next();
  if (rev.number < 0 || rev.number != std::floor(rev.number) || rev.number > 1e15) {
    syntax_error(rev.pos, "revision must be a non-negative integer");
  }
  b.revision = static_cast<long>(rev.number);
  ts.expect_punct("{");
  while (!ts.accept_punct("}")) {
    ts.expect_keyword("scheme");
    auto name = ts.expect_identifier("scheme name");
    b.schemes.push_back(detail::parse_scheme_body(ts, std::move(name)));
  }
  if (!ts.at_end()) ts.unexpected("end of input");
  validate_blueprint(b);
  return b;
}

// --- printing -------------------------------------------------------------

inline std::string print_unit(const std::string& unit) {
  if (unit.empty()) return {};
  return " " + (is_plain_identifier(unit) ? unit : quote_string(unit));
}

// Canonical text: two-space indent, one declaration per line, params then
// constants then outcomes then formulas, each in declaration order.
inline std::string print_blueprint(const Blueprint& b) {
  std::string out = "blueprint " + quote_string(b.model) + " rev " + std::to_string(b.revision) +
                    " {\n";
  for (const auto& s : b.schemes) {
    out += "  scheme " + s.name + " {\n";
    for (const auto& p : s.params) {
      out += "    param " + p.name + " : " + p.feasible.print() + print_unit(p.unit) + ";\n";
    }
    for (const auto& c : s.constants) {
      out += "    const " + c.name;
      if (c.value) out += " = " + format_number(*c.value);
      out += print_unit(c.unit) + ";\n";
    }
    for (const auto& o : s.outcomes) out += "    outcome " + o + ";\n";
    for (const auto& f : s.formulas) {
      out += "    formula " + f.name;
      if (f.guard) out += " when " + print_guard(*f.guard);
      out += " : " + print_expr(f.body) + " -> " + f.outcome + ";\n";
    }
    out += "  }\n";
  }
  out += "}\n";
  return out;
}

}  // namespace nsvtp::scheme
