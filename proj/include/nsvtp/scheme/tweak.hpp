#pragma once

#include <string>
#include <string_view>

#include "nsvtp/error.hpp"
#include "nsvtp/scheme/blueprint.hpp"
#include "nsvtp/scheme/evaluate.hpp"

namespace nsvtp::scheme {

// A formula from a previously received blueprint, populated by the northern
// component. Text form (the tweak TLV payload):
//
//   tweak SCHEME.FORMULA { name = value; ... }
struct Tweak {
  std::string scheme;
  std::string formula;
  Bindings bindings;

  bool operator==(const Tweak&) const = default;
};

struct ValidatedTweak {
  Tweak tweak;
  std::string outcome;
  double outcome_value = 0.0;
};

inline std::string print_tweak(const Tweak& t) {
  std::string out = "tweak " + t.scheme + "." + t.formula + " {";
  for (const auto& [name, value] : t.bindings) {
    out += " " + name + " = " + format_number(value) + ";";
  }
  return out + " }";
}

inline Tweak parse_tweak(std::string_view text) {
  TokenStream ts(text);
  Tweak t;
  ts.expect_keyword("tweak");
  t.scheme = ts.expect_identifier("scheme name");
  ts.expect_punct(".");
  t.formula = ts.expect_identifier("formula name");
  ts.expect_punct("{");
  while (!ts.accept_punct("}")) {
    const auto pos = ts.peek().pos;
    auto name = ts.expect_identifier("parameter name");
    ts.expect_punct("=");
    const double v = ts.expect_signed_number();
    ts.expect_punct(";");
    if (!t.bindings.emplace(name, v).second) {
      syntax_error(pos, "parameter '" + name + "' bound twice");
    }
  }
  if (!ts.at_end()) ts.unexpected("end of input");
  return t;
}

// Accepts the tweak iff the (scheme, formula) pair exists, every scheme
// parameter is bound to a feasible value, and select_regime on those bindings
// lands on the named formula.
inline ValidatedTweak validate_tweak(const Tweak& t, const Blueprint& b,
                                     const Bindings& constants = {}) {
  const auto* s = b.find_scheme(t.scheme);
  if (!s) fail(ErrorCode::UnknownScheme, "blueprint has no scheme '" + t.scheme + "'");
  const auto* f = s->find_formula(t.formula);
  if (!f) {
    fail(ErrorCode::UnknownFormula,
         "scheme '" + t.scheme + "' has no formula '" + t.formula + "'");
  }
  detail::check_bindings_feasible(*s, t.bindings);
  for (const auto& p : s->params) {
    if (!t.bindings.count(p.name)) {
      fail(ErrorCode::MissingBinding, "tweak leaves '" + s->name + "." + p.name + "' unbound");
    }
  }
  const auto& chosen = select_regime(*s, t.bindings, constants);
  if (&chosen != f) {
    fail(ErrorCode::GuardFailed, "bindings select regime '" + chosen.name + "', not '" +
                                     f->name + "'");
  }
  ValidatedTweak v;
  v.tweak = t;
  v.outcome = f->outcome;
  v.outcome_value = evaluate_formula(*s, *f, t.bindings, constants);
  return v;
}

}  // namespace nsvtp::scheme
