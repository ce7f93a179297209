#pragma once

#include <compare>
#include <string>

namespace nsvtp {

// Position of a component in the stack, 0 = southernmost.
struct LayerIndex {
  int value = 0;

  auto operator<=>(const LayerIndex&) const = default;
  std::string str() const { return std::to_string(value); }
};

inline bool adjacent(LayerIndex a, LayerIndex b) {
  return a.value - b.value == 1 || b.value - a.value == 1;
}

}  // namespace nsvtp
