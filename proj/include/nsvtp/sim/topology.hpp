#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nsvtp/codec/capsule.hpp"
#include "nsvtp/error.hpp"
#include "nsvtp/layer.hpp"
#include "nsvtp/scheme/blueprint.hpp"
#include "nsvtp/tx/exchange.hpp"

namespace nsvtp::sim {

using codec::ResourceId;

enum class Grade { Low, High };

inline std::string_view grade_name(Grade g) { return g == Grade::Low ? "low" : "high"; }

struct Component {
  ResourceId id;
  std::string role;
  Grade grade = Grade::Low;
  std::optional<scheme::Blueprint> blueprint;
  std::map<std::string, double> state;  // nonessential, e.g. "frequency" in GHz
  bool alive = true;

  // Canonical blueprint text, the payload of blueprint segments.
  std::string blueprint_text() const {
    return blueprint ? scheme::print_blueprint(*blueprint) : std::string();
  }
};

// True when `high` offers everything `low` does: same schemes, params with
// feasible sets at least as wide, same outcomes and formula names.
inline bool blueprint_covers(const scheme::Blueprint& high, const scheme::Blueprint& low) {
  for (const auto& ls : low.schemes) {
    const auto* hs = high.find_scheme(ls.name);
    if (!hs) return false;
    for (const auto& lp : ls.params) {
      const auto* hp = hs->find_param(lp.name);
      if (!hp || !hp->feasible.includes(lp.feasible)) return false;
    }
    for (const auto& o : ls.outcomes) {
      if (!hs->has_outcome(o)) return false;
    }
    for (const auto& f : ls.formulas) {
      if (!hs->find_formula(f.name)) return false;
    }
  }
  return true;
}

// A position in the stack. Neighbours address the slot, not the component
// installed in it, so rotation is invisible to them.
struct Slot {
  std::string name;
  LayerIndex layer;
  int column = 0;
  std::size_t component = 0;  // index into StackTopology::components()
};

using SlotId = std::size_t;

class StackTopology final : public tx::LayerOracle {
 public:
  SlotId add_slot(std::string name, LayerIndex layer, int column, Component c) {
    for (const auto& s : slots_) {
      if (s.name == name) fail(ErrorCode::ConfigError, "slot '" + name + "' declared twice");
    }
    const auto idx = add_component(std::move(c));
    slots_.push_back({std::move(name), layer, column, idx});
    return slots_.size() - 1;
  }

  void add_spare(Component c) { pool_.push_back(add_component(std::move(c))); }

  void link(SlotId a, SlotId b) {
    if (a >= slots_.size() || b >= slots_.size()) fail(ErrorCode::UnknownComponent, "bad slot");
    if (!adjacent(slots_[a].layer, slots_[b].layer)) {
      fail(ErrorCode::AdjacencyViolation,
           "link " + slots_[a].name + " (layer " + slots_[a].layer.str() + ") - " +
               slots_[b].name + " (layer " + slots_[b].layer.str() +
               ") does not join adjacent layers");
    }
    const std::pair<SlotId, SlotId> key{std::min(a, b), std::max(a, b)};
    if (std::find(links_.begin(), links_.end(), key) == links_.end()) links_.push_back(key);
  }

  // Links every pair of consecutive layers inside each column.
  void link_columns() {
    for (SlotId a = 0; a < slots_.size(); ++a) {
      for (SlotId b = 0; b < slots_.size(); ++b) {
        if (slots_[a].column == slots_[b].column &&
            slots_[b].layer.value == slots_[a].layer.value + 1) {
          link(a, b);
        }
      }
    }
  }

  // Within a role, every high-grade blueprint must cover every low-grade one.
  void check_grade_invariant() const {
    for (const auto& hi : components_) {
      if (hi.grade != Grade::High) continue;
      for (const auto& lo : components_) {
        if (lo.grade != Grade::Low || lo.role != hi.role || !lo.blueprint) continue;
        if (!hi.blueprint || !blueprint_covers(*hi.blueprint, *lo.blueprint)) {
          fail(ErrorCode::GradeInvariant, "high-grade '" + hi.id.str() +
                                              "' does not cover the blueprint of low-grade '" +
                                              lo.id.str() + "'");
        }
      }
    }
  }

  const std::vector<Slot>& slots() const { return slots_; }
  const std::vector<Component>& components() const { return components_; }
  const std::vector<std::pair<SlotId, SlotId>>& links() const { return links_; }
  const std::vector<std::size_t>& pool() const { return pool_; }

  Component& component(std::size_t idx) { return components_.at(idx); }
  const Component& component(std::size_t idx) const { return components_.at(idx); }
  Component& installed(SlotId s) { return components_.at(slots_.at(s).component); }
  const Component& installed(SlotId s) const { return components_.at(slots_.at(s).component); }

  std::size_t component_index(const ResourceId& id) const {
    for (std::size_t i = 0; i < components_.size(); ++i) {
      if (components_[i].id == id) return i;
    }
    fail(ErrorCode::UnknownComponent, "no component '" + id.str() + "'");
  }

  std::optional<SlotId> slot_of(const ResourceId& id) const {
    for (SlotId s = 0; s < slots_.size(); ++s) {
      if (components_[slots_[s].component].id == id) return s;
    }
    return std::nullopt;
  }

  SlotId slot_named(std::string_view name) const {
    for (SlotId s = 0; s < slots_.size(); ++s) {
      if (slots_[s].name == name) return s;
    }
    fail(ErrorCode::UnknownComponent, "no slot '" + std::string(name) + "'");
  }

  std::optional<LayerIndex> layer_of(const ResourceId& id) const override {
    if (auto s = slot_of(id)) return slots_[*s].layer;
    return std::nullopt;
  }

  // Shortest slot path over links, breadth first with neighbours visited in
  // slot order so ties break deterministically. Liveness is not considered.
  std::vector<SlotId> path(SlotId from, SlotId to) const {
    if (from == to) return {from};
    std::vector<std::optional<SlotId>> prev(slots_.size());
    std::vector<bool> seen(slots_.size(), false);
    std::deque<SlotId> queue{from};
    seen[from] = true;
    while (!queue.empty()) {
      const auto cur = queue.front();
      queue.pop_front();
      for (const auto nb : neighbours(cur)) {
        if (seen[nb]) continue;
        seen[nb] = true;
        prev[nb] = cur;
        if (nb == to) {
          std::vector<SlotId> out{to};
          while (out.back() != from) out.push_back(*prev[out.back()]);
          std::reverse(out.begin(), out.end());
          return out;
        }
        queue.push_back(nb);
      }
    }
    fail(ErrorCode::NoPath, "no adjacency path from '" + slots_[from].name + "' to '" +
                                slots_[to].name + "'");
  }

  // Swaps the component in `slot` for pool entry `pool_pos`.
  void install_from_pool(SlotId slot, std::size_t pool_pos) {
    const auto idx = pool_.at(pool_pos);
    pool_.erase(pool_.begin() + static_cast<std::ptrdiff_t>(pool_pos));
    slots_.at(slot).component = idx;
  }

 private:
  std::size_t add_component(Component c) {
    for (const auto& e : components_) {
      if (e.id == c.id) fail(ErrorCode::ConfigError, "component '" + c.id.str() + "' declared twice");
    }
    components_.push_back(std::move(c));
    return components_.size() - 1;
  }

  std::vector<SlotId> neighbours(SlotId s) const {
    std::vector<SlotId> out;
    for (const auto& [a, b] : links_) {
      if (a == s) out.push_back(b);
      if (b == s) out.push_back(a);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<Component> components_;
  std::vector<Slot> slots_;
  std::vector<std::pair<SlotId, SlotId>> links_;
  std::vector<std::size_t> pool_;
};

}  // namespace nsvtp::sim
