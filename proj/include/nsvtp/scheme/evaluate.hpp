#pragma once

#include <map>
#include <string>

#include "nsvtp/error.hpp"
#include "nsvtp/scheme/blueprint.hpp"

namespace nsvtp::scheme {

using Bindings = std::map<std::string, double>;

namespace detail {

inline void check_bindings_feasible(const Scheme& s, const Bindings& bindings) {
  for (const auto& [name, value] : bindings) {
    const auto* p = s.find_param(name);
    if (!p) {
      fail(ErrorCode::UnknownIdentifier,
           "binding '" + name + "' names no parameter of scheme '" + s.name + "'");
    }
    if (!p->feasible.contains(value)) {
      fail(ErrorCode::OutOfFeasibleSet, "value " + format_number(value) + " for '" + s.name +
                                            "." + name + "' is outside " + p->feasible.print());
    }
  }
}

// Params resolve from bindings; constants from the override map first, then
// the value declared in the scheme.
inline Lookup make_lookup(const Scheme& s, const Bindings& bindings, const Bindings& constants) {
  return [&s, &bindings, &constants](const std::string& name) -> double {
    if (s.find_param(name)) {
      auto it = bindings.find(name);
      if (it == bindings.end()) {
        fail(ErrorCode::UnboundParam, "parameter '" + s.name + "." + name + "' is not bound");
      }
      return it->second;
    }
    if (const auto* c = s.find_constant(name)) {
      if (auto it = constants.find(name); it != constants.end()) return it->second;
      if (c->value) return *c->value;
      fail(ErrorCode::UnboundParam, "constant '" + s.name + "." + name + "' has no value");
    }
    fail(ErrorCode::UnknownIdentifier, "symbol '" + name + "' is not declared");
  };
}

}  // namespace detail

inline bool guard_holds(const Scheme& s, const Formula& f, const Bindings& bindings,
                        const Bindings& constants = {}) {
  if (!f.guard) return true;
  return evaluate(*f.guard, detail::make_lookup(s, bindings, constants));
}

// Value of the formula body. Every bound parameter must lie in its feasible
// set and the formula's guard must hold.
inline double evaluate_formula(const Scheme& s, const Formula& f, const Bindings& bindings,
                               const Bindings& constants = {}) {
  detail::check_bindings_feasible(s, bindings);
  const auto lookup = detail::make_lookup(s, bindings, constants);
  if (f.guard && !evaluate(*f.guard, lookup)) {
    fail(ErrorCode::GuardFailed, "bindings violate the guard of '" + s.name + "." + f.name +
                                     "' (" + print_guard(*f.guard) + ")");
  }
  return evaluate(f.body, lookup);
}

// Picks the single formula whose guard holds. Unguarded formulas are a
// fallback used only when no guard matches. Overlapping guards are an error,
// never resolved by declaration order.
inline const Formula& select_regime(const Scheme& s, const Bindings& bindings,
                                    const Bindings& constants = {}) {
  const Formula* match = nullptr;
  const Formula* fallback = nullptr;
  int matches = 0;
  int fallbacks = 0;
  const auto lookup = detail::make_lookup(s, bindings, constants);
  for (const auto& f : s.formulas) {
    if (!f.guard) {
      fallback = &f;
      ++fallbacks;
    } else if (evaluate(*f.guard, lookup)) {
      match = &f;
      ++matches;
    }
  }
  if (matches > 1) {
    fail(ErrorCode::AmbiguousRegime,
         std::to_string(matches) + " guarded formulas of '" + s.name + "' match the bindings");
  }
  if (matches == 1) return *match;
  if (fallbacks > 1) {
    fail(ErrorCode::AmbiguousRegime,
         "no guard matches and '" + s.name + "' has several unguarded formulas");
  }
  if (fallbacks == 1) return *fallback;
  fail(ErrorCode::NoRegimeMatches, "no formula of '" + s.name + "' covers the bindings");
}

}  // namespace nsvtp::scheme
