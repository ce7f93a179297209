#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nsvtp/bytes.hpp"
#include "nsvtp/codec/base64url.hpp"
#include "nsvtp/codec/capsule.hpp"
#include "nsvtp/dvfs/model.hpp"
#include "nsvtp/error.hpp"
#include "nsvtp/scheme/tweak.hpp"
#include "nsvtp/sim/topology.hpp"
#include "nsvtp/sim/trace.hpp"
#include "nsvtp/tx/exchange.hpp"

namespace nsvtp::sim {

using codec::Capsule;
using codec::ExtendedResourceId;

struct Hop {
  ResourceId from;
  ResourceId to;
  LayerIndex from_layer;
  LayerIndex to_layer;
  double time = 0.0;
};

struct DeliveryTrace {
  std::vector<Hop> hops;
  bool delivered = false;
  bool queued = false;
  bool dropped = false;
  std::string bytes_at_source;
  std::string bytes_at_destination;
  double delivered_at = 0.0;
};

struct MainResult {
  std::string payload;  // bare name of the call
  std::string result;
  double time = 0.0;
};

struct SimConfig {
  dvfs::ModelParams model;
  double hop_delay = 0.0;
  tx::PathwayMode mode = tx::PathwayMode::ViaTX;
  bool encrypt = false;
  double tx_ttl = 60.0;
  std::uint64_t seed = 1;
  std::int64_t cores = 1;
};

// The role whose installed components draw power in the energy ledger.
inline constexpr std::string_view kCoreRole = "cpu";

// Deterministic 16-byte key for one pathway initiation.
inline Bytes derive_key(std::uint64_t seed, std::string_view label, const ResourceId& south,
                        const ResourceId& north, std::uint64_t epoch) {
  std::uint64_t state = seed ^ fnv1a64(label);
  state ^= fnv1a64(south.str(), state);
  state ^= fnv1a64(north.str(), state) + epoch * 0x9e3779b97f4a7c15ULL;
  Bytes out;
  for (int i = 0; i < 2; ++i) {
    const auto w = splitmix64(state);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(w >> (8 * b)));
  }
  return out;
}

// Hex FNV-1a of a blueprint text; lets a trace show that what the north
// unsealed is what the south deposited.
inline std::string text_digest(std::string_view text) {
  const auto h = fnv1a64(text);
  Bytes b;
  for (int i = 7; i >= 0; --i) b.push_back(static_cast<std::uint8_t>(h >> (8 * i)));
  return to_hex(b);
}

// What the main function of a component returns for a call. Depends only on
// the bare name and the role, never on the installed instance or its state.
inline std::string main_function(std::string_view role, std::string_view bare) {
  const auto h = fnv1a64(std::string(bare) + "|" + std::string(role));
  Bytes b;
  for (int i = 7; i >= 0; --i) b.push_back(static_cast<std::uint8_t>(h >> (8 * i)));
  return std::string(role) + ":" + to_hex(b);
}

class Simulator {
 public:
  Simulator(StackTopology topology, SimConfig config)
      : topo_(std::move(topology)), cfg_(config), tx_(config.tx_ttl) {
    cfg_.model.validate();
    if (!(cfg_.hop_delay >= 0) || !std::isfinite(cfg_.hop_delay)) {
      fail(ErrorCode::ConfigError, "hop delay must be >= 0");
    }
    if (cfg_.cores < 1) fail(ErrorCode::ConfigError, "core count must be >= 1");
    topo_.check_grade_invariant();
    for (std::size_t i = 0; i < topo_.components().size(); ++i) reset_core_state(i);
    refresh_power();
  }

  // --- clock and queue ------------------------------------------------------

  double now() const { return now_; }

  void schedule(double t, std::function<void()> action) {
    if (t < now_) t = now_;
    queue_.push({t, next_seq_++, std::move(action)});
  }

  // Processes events in (time, insertion order) until the queue drains.
  void run() {
    while (step()) {
    }
  }

  void run_until(double t) {
    while (!queue_.empty() && queue_.top().time <= t) step();
    if (now_ < t) now_ = t;
  }

  bool step() {
    if (queue_.empty()) return false;
    auto ev = queue_.top();
    queue_.pop();
    now_ = ev.time;
    ev.action();
    return true;
  }

  // --- accessors ------------------------------------------------------------

  const StackTopology& topology() const { return topo_; }
  const SimConfig& config() const { return cfg_; }
  const Trace& trace() const { return trace_; }
  const tx::TrustedExchange& exchange() const { return tx_; }
  const std::vector<MainResult>& main_results() const { return results_; }

  const Component& component(const ResourceId& id) const {
    return topo_.component(topo_.component_index(id));
  }
  const Component& installed(SlotId s) const { return topo_.installed(s); }

  std::size_t decode_count(const ResourceId& id) const {
    auto it = decodes_.find(id);
    return it == decodes_.end() ? 0 : it->second;
  }
  std::size_t slot_decode_count(SlotId s) const {
    auto it = slot_decodes_.find(s);
    return it == slot_decodes_.end() ? 0 : it->second;
  }
  const std::vector<std::string>& relay_log(const ResourceId& id) const {
    static const std::vector<std::string> empty;
    auto it = relay_logs_.find(id);
    return it == relay_logs_.end() ? empty : it->second;
  }
  std::size_t queued_calls() const {
    std::size_t n = 0;
    for (const auto& [s, q] : parked_) n += q.size();
    return n;
  }

  const tx::Pathway* pathway(const ResourceId& south, const ResourceId& north) const {
    auto it = pathways_.find({south, north});
    return it == pathways_.end() ? nullptr : &it->second.pathway;
  }
  // The north's parsed copy of the south's blueprint on a pathway.
  const scheme::Blueprint* north_view(const ResourceId& south, const ResourceId& north) const {
    auto it = pathways_.find({south, north});
    if (it == pathways_.end() || !it->second.north_view) return nullptr;
    return &*it->second.north_view;
  }

  // --- energy ---------------------------------------------------------------

  // Energy is integrated up to the horizon only.
  void set_horizon(double t) { ledger_.horizon = t; }
  double energy() {
    ledger_.advance(now_);
    return ledger_.energy;
  }
  double energy_at_horizon() {
    ledger_.advance(ledger_.horizon);
    return ledger_.energy;
  }
  double current_power() const { return ledger_.power; }

  // --- main service ---------------------------------------------------------

  std::uint64_t post_main_call(const ResourceId& src, const ResourceId& dst,
                               const ExtendedResourceId& payload) {
    const auto s = require_slot(src);
    const auto d = require_slot(dst);
    const auto wire = codec::encode_extended_id(payload, codec::ElisionContext{});
    auto path = topo_.path(s, d);
    trace_.add(now_, kind::MainCall, src.str(), dst.str(), Phase::Run,
               {{"payload", std::string(codec::bare_name(wire))}, {"hops", path.size() - 1}});
    Message m;
    m.kind = MessageKind::Main;
    m.phase = Phase::Run;
    m.wire = wire;
    m.path = std::move(path);
    m.src = src;
    m.trace.bytes_at_source = wire;
    m.on_arrival = [this](Message& msg) {
      const auto& c = topo_.installed(msg.path.back());
      const auto bare = std::string(codec::bare_name(msg.wire));
      auto result = main_function(c.role, bare);
      results_.push_back({bare, result, now_});
      trace_.add(now_, kind::MainCallDone, msg.src.str(), c.id.str(), Phase::Run,
                 {{"payload", bare}, {"result", result}});
    };
    return launch(std::move(m));
  }

  DeliveryTrace deliver_main_call(const ResourceId& src, const ResourceId& dst,
                                  const ExtendedResourceId& payload) {
    require_alive(src);
    require_alive(dst);
    const auto id = post_main_call(src, dst, payload);
    return settle(id);
  }

  // --- failure and rotation -------------------------------------------------

  void fail_component(const ResourceId& id, double t) {
    const auto idx = topo_.component_index(id);
    if (!topo_.component(idx).alive) fail(ErrorCode::AlreadyDead, "'" + id.str() + "' is already dead");
    schedule(t, [this, idx] { kill(idx); });
    if (t <= now_) step_until_killed(idx);
  }

  const Component& rotate_component(const ResourceId& dead) {
    const auto idx = topo_.component_index(dead);
    const auto slot = topo_.slot_of(dead);
    if (!slot) fail(ErrorCode::UnknownComponent, "'" + dead.str() + "' is not installed in any slot");
    const auto& gone = topo_.component(idx);
    if (gone.alive) fail(ErrorCode::ComponentAlive, "'" + dead.str() + "' is still alive");

    std::optional<std::size_t> pick;
    for (const Grade want : {gone.grade, Grade::High}) {
      for (std::size_t p = 0; p < topo_.pool().size() && !pick; ++p) {
        const auto& spare = topo_.component(topo_.pool()[p]);
        if (spare.alive && spare.role == gone.role && spare.grade == want) pick = p;
      }
      if (pick) break;
    }
    if (!pick) {
      fail(ErrorCode::PoolExhausted, "no spare of role '" + gone.role + "' at grade " +
                                         std::string(grade_name(gone.grade)) + " or higher");
    }
    ledger_.advance(now_);
    const auto new_idx = topo_.pool()[*pick];
    topo_.install_from_pool(*slot, *pick);
    reset_core_state(new_idx);
    refresh_power();
    const auto& fresh = topo_.component(new_idx);
    trace_.add(now_, kind::Rotation, dead.str(), fresh.id.str(), Phase::Run,
               {{"slot", topo_.slots()[*slot].name},
                {"grade", grade_name(fresh.grade)},
                {"upgraded", fresh.grade != gone.grade}});

    // Calls parked at the slot continue through the replacement.
    auto parked = std::move(parked_[*slot]);
    parked_.erase(*slot);
    for (const auto mid : parked) schedule(now_, [this, mid] { arrive(mid); });

    for (const auto& want : wanted_) {
      if (want.first == *slot || want.second == *slot) {
        schedule(now_, [this, want] { try_establish(want.first, want.second); });
      }
    }
    return fresh;
  }

  // --- NSVTP ----------------------------------------------------------------

  // Keeps a pathway between the components installed in two slots, and
  // re-initiates it whenever either end is rotated.
  void maintain_pathway(SlotId south, SlotId north, double at) {
    wanted_.emplace_back(south, north);
    schedule(at, [this, south, north] { try_establish(south, north); });
  }

  std::uint64_t post_nsvtp(const ResourceId& src, const ResourceId& dst, const Capsule& capsule) {
    require_slot(src);
    require_slot(dst);
    require_alive(src);
    const bool northwise = topo_.layer_of(src) < topo_.layer_of(dst);
    const auto key_pair = northwise ? std::pair{src, dst} : std::pair{dst, src};
    auto it = pathways_.find(key_pair);
    if (it == pathways_.end()) {
      fail(ErrorCode::PathwayNotEstablished,
           "no pathway between '" + src.str() + "' and '" + dst.str() + "'");
    }
    const auto want_dir = northwise ? codec::Direction::Northwise : codec::Direction::Southwise;
    if (capsule.header.direction != want_dir) {
      fail(ErrorCode::InvalidCapsule, "capsule direction does not match the hop direction");
    }
    const auto& pw = it->second.pathway;
    const Bytes key = capsule.header.flags.encrypted()
                          ? (northwise ? pw.north_key : pw.south_key)
                          : Bytes{};
    auto& ctx = sender_ctx_[{src, dst}];
    const auto wire = codec::encode_extended_id({src, capsule}, ctx, key);
    ctx.observe(capsule);

    Message m;
    m.kind = MessageKind::Nsvtp;
    m.phase = Phase::Run;
    m.wire = wire;
    m.path = topo_.path(require_slot(src), require_slot(dst));
    m.src = src;
    m.dst = dst;
    m.trace.bytes_at_source = wire;
    m.on_arrival = [this, key](Message& msg) { receive_nsvtp(msg, key); };
    return launch(std::move(m));
  }

  DeliveryTrace send_nsvtp(const ResourceId& src, const ResourceId& dst, const Capsule& capsule) {
    const auto id = post_nsvtp(src, dst, capsule);
    return settle(id);
  }

  // Runs the exchange handshake to completion. With `claimant` set, that
  // component intercepts k' and claims in place of the north.
  const tx::Pathway& establish_via_tx(const ResourceId& south, const ResourceId& north,
                                      std::optional<ResourceId> claimant = std::nullopt) {
    begin_via_tx(south, north, std::move(claimant));
    return finish_establish(south, north);
  }

  const tx::Pathway& establish_direct(const ResourceId& south, const ResourceId& north) {
    begin_direct(south, north);
    return finish_establish(south, north);
  }

  const tx::Pathway& establish(const ResourceId& south, const ResourceId& north) {
    return cfg_.mode == tx::PathwayMode::ViaTX ? establish_via_tx(south, north)
                                               : establish_direct(south, north);
  }

 private:
  enum class MessageKind { Main, Nsvtp, RelayKey };

  struct Message {
    MessageKind kind = MessageKind::Main;
    Phase phase = Phase::Run;
    std::string wire;
    std::vector<SlotId> path;
    std::size_t hop = 0;  // index into path of the slot the message is at
    ResourceId src;
    std::optional<ResourceId> dst;  // the intended endpoint instance
    DeliveryTrace trace;
    bool done = false;
    std::function<void(Message&)> on_arrival;
  };

  struct PendingEvent {
    double time;
    std::uint64_t seq;
    std::function<void()> action;
    bool operator>(const PendingEvent& o) const {
      return time != o.time ? time > o.time : seq > o.seq;
    }
  };

  struct PathwayState {
    tx::Pathway pathway;
    std::optional<scheme::Blueprint> north_view;
  };

  struct CoreState {
    double freq = 0.0;
    std::optional<double> target;
    std::uint64_t serial = 0;
    std::deque<std::pair<double, double>> pending;  // (target, latency)
  };

  struct Ledger {
    double energy = 0.0;
    double power = 0.0;
    double last = 0.0;
    double horizon = std::numeric_limits<double>::infinity();

    void advance(double t) {
      t = std::min(t, horizon);
      if (t > last) {
        energy += power * (t - last);
        last = t;
      }
    }
  };

  using Pair = std::pair<ResourceId, ResourceId>;

  // --- message plumbing -----------------------------------------------------

  std::uint64_t launch(Message m) {
    const auto id = next_msg_++;
    messages_.emplace(id, std::move(m));
    schedule(now_, [this, id] { arrive(id); });
    return id;
  }

  DeliveryTrace settle(std::uint64_t id) {
    while (!messages_.at(id).done && step()) {
    }
    auto out = messages_.at(id).trace;
    messages_.erase(id);
    return out;
  }

  void arrive(std::uint64_t id) {
    auto& m = messages_.at(id);
    const auto slot = m.path[m.hop];
    const auto& c = topo_.installed(slot);
    if (!c.alive) {
      if (m.kind == MessageKind::Main) {
        m.trace.queued = true;
        parked_[slot].push_back(id);
        trace_.add(now_, kind::MainCallQueued, m.src.str(), c.id.str(), m.phase,
                   {{"payload", std::string(codec::bare_name(m.wire))}, {"slot", topo_.slots()[slot].name}});
      } else {
        drop(m, c.id, "dead component");
      }
      return;
    }
    if (m.hop + 1 == m.path.size()) {
      if (m.dst && c.id != *m.dst) {
        drop(m, c.id, "endpoint was replaced");
        return;
      }
      m.trace.delivered = true;
      m.trace.queued = false;
      m.trace.delivered_at = now_;
      m.trace.bytes_at_destination = m.wire;
      m.done = true;
      auto handler = m.on_arrival;
      if (handler) handler(m);
      return;
    }
    // Middle or source: a relay only ever looks at the bare name.
    if (m.hop > 0) relay_logs_[c.id].emplace_back(codec::bare_name(m.wire));
    const auto next = m.path[m.hop + 1];
    const auto& nc = topo_.installed(next);
    m.trace.hops.push_back(
        {c.id, nc.id, topo_.slots()[slot].layer, topo_.slots()[next].layer, now_});
    trace_.add(now_, kind::RelayHop, c.id.str(), nc.id.str(), m.phase,
               {{"name", std::string(codec::bare_name(m.wire))},
                {"from_layer", topo_.slots()[slot].layer.value},
                {"to_layer", topo_.slots()[next].layer.value}});
    m.hop += 1;
    schedule(now_ + cfg_.hop_delay, [this, id] { arrive(id); });
  }

  void drop(Message& m, const ResourceId& at, std::string_view why) {
    m.trace.dropped = true;
    m.done = true;
    trace_.add(now_, kind::NsvtpDropped, m.src.str(), at.str(), m.phase, {{"reason", why}});
  }

  // --- NSVTP endpoints ------------------------------------------------------

  void receive_nsvtp(Message& m, const Bytes& key) {
    const auto& dst = *m.dst;
    count_decode(dst, m.path.back());
    auto& ctx = receiver_ctx_[{m.src, dst}];
    const auto xid = codec::decode_extended_id(m.wire, ctx, key);
    if (!xid.appendix) return;
    const Capsule& c = *xid.appendix;
    ctx.observe(c);

    nlohmann::ordered_json detail;
    detail["direction"] = codec::direction_name(c.header.direction);
    detail["wire_bytes"] = m.wire.size();
    if (const auto st = c.status_record()) detail["status"] = nlohmann::ordered_json::parse(st->to_canonical_json());
    if (!c.tweaks.empty()) {
      auto arr = nlohmann::ordered_json::array();
      for (const auto& t : c.tweaks) arr.push_back(to_string(t));
      detail["tweaks"] = arr;
    }
    trace_.add(now_, kind::Nsvtp, m.src.str(), dst.str(), m.phase, detail);

    if (c.header.direction == codec::Direction::Northwise) {
      if (c.blueprint && c.blueprint->is_present()) {
        note_blueprint(m.src, dst, to_string(c.blueprint->bytes), m.phase);
      }
      return;
    }
    for (const auto& t : c.tweaks) apply_tweak(dst, to_string(t));
  }

  void note_blueprint(const ResourceId& south, const ResourceId& north, const std::string& text,
                      Phase phase) {
    auto& st = pathways_[{south, north}];
    auto parsed = scheme::parse_blueprint(text);
    if (st.north_view && *st.north_view == parsed) return;
    trace_.add(now_, kind::BlueprintReceived, south.str(), north.str(), phase,
               {{"model", parsed.model}, {"revision", parsed.revision}, {"schemes", scheme_names(parsed)}});
    st.north_view = std::move(parsed);
  }

  static nlohmann::ordered_json scheme_names(const scheme::Blueprint& b) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& s : b.schemes) arr.push_back(s.name);
    return arr;
  }

  void apply_tweak(const ResourceId& dst, const std::string& text) {
    const auto idx = topo_.component_index(dst);
    auto& comp = topo_.component(idx);
    scheme::ValidatedTweak v;
    try {
      if (!comp.blueprint) fail(ErrorCode::UnknownScheme, "'" + dst.str() + "' exposes no blueprint");
      v = scheme::validate_tweak(scheme::parse_tweak(text), *comp.blueprint);
    } catch (const Error& e) {
      fail(ErrorCode::TweakRejected, "'" + dst.str() + "' rejected \"" + text + "\": " + e.render());
    }
    trace_.add(now_, kind::TweakApplied, dst.str(), dst.str(), Phase::Run,
               {{"tweak", text}, {"outcome", v.outcome}, {"value", v.outcome_value}});
    const auto& b = v.tweak.bindings;
    if (v.tweak.scheme == "dvfs" && b.count("freq_step") && b.count("latency")) {
      begin_freq_change(idx, b.at("freq_step"), b.at("latency"));
      return;
    }
    for (const auto& [name, value] : b) comp.state[v.tweak.scheme + "." + name] = value;
    comp.state[v.tweak.scheme + "." + v.outcome] = v.outcome_value;
  }

  // --- DVFS state and power -------------------------------------------------

  void reset_core_state(std::size_t idx) {
    auto& st = cores_[idx];
    st = CoreState{};
    st.freq = cfg_.model.f_max;
    st.serial = ++serial_;
    if (topo_.component(idx).role == kCoreRole) topo_.component(idx).state["frequency"] = st.freq;
  }

  void begin_freq_change(std::size_t idx, double target, double latency) {
    auto& st = cores_[idx];
    if (st.target) {
      st.pending.emplace_back(target, latency);
      return;
    }
    ledger_.advance(now_);
    st.target = target;
    const auto serial = st.serial;
    auto& comp = topo_.component(idx);
    trace_.add(now_, kind::FrequencyChangeStart, comp.id.str(), comp.id.str(), Phase::Run,
               {{"from_ghz", st.freq}, {"to_ghz", target}, {"latency_s", latency}});
    refresh_power();
    schedule(now_ + latency, [this, idx, serial] { finish_freq_change(idx, serial); });
  }

  void finish_freq_change(std::size_t idx, std::uint64_t serial) {
    auto& st = cores_[idx];
    auto& comp = topo_.component(idx);
    if (st.serial != serial || !comp.alive || !st.target) return;
    ledger_.advance(now_);
    st.freq = *st.target;
    st.target.reset();
    comp.state["frequency"] = st.freq;
    refresh_power();
    const double watts = dvfs::core_power(cfg_.model, st.freq, cfg_.model.l_max);
    trace_.add(now_, kind::FrequencyChangeDone, comp.id.str(), comp.id.str(), Phase::Run,
               {{"frequency_ghz", st.freq}, {"power_w", watts}});
    report_status(comp, st.freq, watts);
    if (!st.pending.empty()) {
      const auto [t, l] = st.pending.front();
      st.pending.pop_front();
      begin_freq_change(idx, t, l);
    }
  }

  // Northwise status update to every north this component serves. The
  // blueprint rides along and is elided by the context.
  void report_status(const Component& comp, double freq, double watts) {
    for (const auto& [key, st] : pathways_) {
      if (key.first != comp.id) continue;
      const auto& north = topo_.component(topo_.component_index(key.second));
      if (!north.alive) continue;
      codec::StatusRecord rec;
      rec.set("frequency", freq);
      rec.set("power", watts);
      const auto text = comp.blueprint_text();
      auto cap = Capsule::northwise(text.empty() ? std::nullopt : std::optional<std::string_view>(text),
                                    rec, codec::CapsuleFlags::per_segment(true, cfg_.encrypt));
      post_nsvtp(comp.id, key.second, cap);
      break;
    }
  }

  double power_of(std::size_t idx) const {
    const auto& c = topo_.component(idx);
    if (!c.alive || c.role != kCoreRole) return 0.0;
    const auto& st = cores_.at(idx);
    const double l = cfg_.model.l_max;
    double p = dvfs::core_power(cfg_.model, st.freq, l);
    // A transition is billed at the higher of its two end levels, so both
    // the step down and the step up cost full power.
    if (st.target) p = std::max(p, dvfs::core_power(cfg_.model, *st.target, l));
    return p * static_cast<double>(cfg_.cores);
  }

  void refresh_power() {
    double total = 0.0;
    for (SlotId s = 0; s < topo_.slots().size(); ++s) total += power_of(topo_.slots()[s].component);
    ledger_.power = total;
  }

  // --- failure --------------------------------------------------------------

  void kill(std::size_t idx) {
    auto& c = topo_.component(idx);
    if (!c.alive) return;
    ledger_.advance(now_);
    c.alive = false;
    cores_[idx].serial = ++serial_;
    cores_[idx].target.reset();
    cores_[idx].pending.clear();
    refresh_power();
    const auto slot = topo_.slot_of(c.id);
    trace_.add(now_, kind::Failure, c.id.str(), c.id.str(), Phase::Run,
               {{"slot", slot ? topo_.slots()[*slot].name : std::string("pool")}});
    for (auto it = pathways_.begin(); it != pathways_.end();) {
      if (it->first.first == c.id || it->first.second == c.id) {
        trace_.add(now_, kind::PathwayClosed, it->first.first.str(), it->first.second.str(),
                   Phase::Run, nlohmann::ordered_json::object());
        sender_ctx_.erase(it->first);
        sender_ctx_.erase({it->first.second, it->first.first});
        receiver_ctx_.erase(it->first);
        receiver_ctx_.erase({it->first.second, it->first.first});
        it = pathways_.erase(it);
      } else {
        ++it;
      }
    }
  }

  void step_until_killed(std::size_t idx) {
    while (topo_.component(idx).alive && step()) {
    }
  }

  // --- establishment --------------------------------------------------------

  void try_establish(SlotId south, SlotId north) {
    const auto& s = topo_.installed(south);
    const auto& n = topo_.installed(north);
    if (!s.alive || !n.alive || !s.blueprint || pathways_.count({s.id, n.id})) return;
    if (cfg_.mode == tx::PathwayMode::ViaTX) {
      begin_via_tx(s.id, n.id, std::nullopt);
    } else {
      begin_direct(s.id, n.id);
    }
  }

  const Component& endpoint(const ResourceId& id) {
    require_slot(id);
    require_alive(id);
    return topo_.component(topo_.component_index(id));
  }

  void begin_via_tx(const ResourceId& south_id, const ResourceId& north_id,
                    std::optional<ResourceId> claimant) {
    const auto& south = endpoint(south_id);
    endpoint(north_id);
    if (!south.blueprint) {
      fail(ErrorCode::PathwayNotEstablished, "'" + south_id.str() + "' has no blueprint to offer");
    }
    const auto epoch = ++epochs_[{south_id, north_id}];
    const auto k = derive_key(cfg_.seed, "k", south_id, north_id, epoch);
    const auto k1 = derive_key(cfg_.seed, "k'", south_id, north_id, epoch);
    const auto k2 = derive_key(cfg_.seed, "k''", south_id, north_id, epoch);
    const auto north_layer = *topo_.layer_of(north_id);
    const auto text = south.blueprint_text();
    const auto capsule = tx::seal_blueprint(text, k);
    const auto sealed = tx::seal_deposit(capsule, k, k1);
    const std::string pw = south_id.str() + "->" + north_id.str();

    trace_.add(now_, kind::TxDeposit, south_id.str(), std::string(kTxAddress), Phase::Init,
               {{"pathway", pw}, {"relay_key", to_hex(k1)}, {"target_layer", north_layer.value},
                {"capsule_bytes", capsule.size()}, {"blueprint_fnv", text_digest(text)}});
    tx_.deposit({k1, sealed, north_layer, south_id}, now_);

    const auto receiver = claimant.value_or(north_id);
    Message m;
    m.kind = MessageKind::RelayKey;
    m.phase = Phase::Init;
    m.wire = south_id.str() + codec::kAppendixDelimiter + codec::base64url_encode(k1);
    m.path = topo_.path(require_slot(south_id), require_slot(receiver));
    m.src = south_id;
    m.dst = receiver;
    m.trace.bytes_at_source = m.wire;
    m.on_arrival = [this, south_id, north_id, receiver, north_layer, k2, pw](Message& msg) {
      const auto appendix = std::string_view(msg.wire).substr(codec::bare_name(msg.wire).size() + 1);
      const auto relay_key = codec::base64url_decode(appendix).value_or(Bytes{});
      trace_.add(now_, kind::RelayKeyReceived, south_id.str(), receiver.str(), Phase::Init,
                 {{"pathway", pw}});
      trace_.add(now_, kind::TxClaim, receiver.str(), std::string(kTxAddress), Phase::Init,
                 {{"pathway", pw}, {"claimed_layer", north_layer.value}});
      auto got = tx_.claim(receiver, {relay_key, north_layer, k2}, topo_, now_);
      const auto opened = tx::unseal_blueprint(got.capsule, got.north_key);
      trace_.add(now_, kind::TxRelease, std::string(kTxAddress), receiver.str(), Phase::Init,
                 {{"pathway", pw}, {"capsule_bytes", got.capsule.size()},
                  {"blueprint_fnv", text_digest(opened)}});
      trace_.add(now_, kind::TxNotifySouth, std::string(kTxAddress), got.depositor.str(),
                 Phase::Init, {{"pathway", pw}, {"south_key", to_hex(got.south_key)}});
      open_pathway({south_id, north_id, got.north_key, got.south_key, now_, tx::PathwayMode::ViaTX},
                   opened);
    };
    launch(std::move(m));
  }

  void begin_direct(const ResourceId& south_id, const ResourceId& north_id) {
    const auto& south = endpoint(south_id);
    endpoint(north_id);
    if (!south.blueprint) {
      fail(ErrorCode::PathwayNotEstablished, "'" + south_id.str() + "' has no blueprint to offer");
    }
    const auto epoch = ++epochs_[{south_id, north_id}];
    const auto k = derive_key(cfg_.seed, "k", south_id, north_id, epoch);
    const auto k2 = derive_key(cfg_.seed, "k''", south_id, north_id, epoch);
    const auto text = south.blueprint_text();
    const auto cap = Capsule::northwise(text, std::nullopt, codec::CapsuleFlags::per_segment(true, false));
    codec::ElisionContext fresh;
    const auto wire = codec::encode_extended_id({south_id, cap}, fresh);

    Message m;
    m.kind = MessageKind::Nsvtp;
    m.phase = Phase::Init;
    m.wire = wire;
    m.path = topo_.path(require_slot(south_id), require_slot(north_id));
    m.src = south_id;
    m.dst = north_id;
    m.trace.bytes_at_source = wire;
    m.on_arrival = [this, south_id, north_id, k, k2](Message& msg) {
      count_decode(north_id, msg.path.back());
      const auto xid = codec::decode_extended_id(msg.wire, codec::ElisionContext{});
      trace_.add(now_, kind::Nsvtp, south_id.str(), north_id.str(), Phase::Init,
                 {{"direction", "northwise"}, {"wire_bytes", msg.wire.size()}});
      open_pathway({south_id, north_id, k, k2, now_, tx::PathwayMode::Direct},
                   to_string(xid.appendix->blueprint->bytes));
    };
    launch(std::move(m));
  }

  // Both sides start with the blueprint as the last seen value on the
  // northwise direction, whichever way it travelled.
  void open_pathway(tx::Pathway p, const std::string& blueprint_text) {
    const Pair key{p.south, p.north};
    sender_ctx_[key] = codec::ElisionContext{to_bytes(blueprint_text), std::nullopt};
    receiver_ctx_[key] = codec::ElisionContext{to_bytes(blueprint_text), std::nullopt};
    sender_ctx_[{p.north, p.south}] = {};
    receiver_ctx_[{p.north, p.south}] = {};
    auto& st = pathways_[key];
    st.pathway = p;
    note_blueprint(p.south, p.north, blueprint_text, Phase::Init);
    trace_.add(now_, kind::PathwayEstablished, p.south.str(), p.north.str(), Phase::Init,
               {{"mode", tx::mode_name(p.mode)}});
  }

  const tx::Pathway& finish_establish(const ResourceId& south, const ResourceId& north) {
    while (!pathways_.count({south, north}) && step()) {
    }
    auto it = pathways_.find({south, north});
    if (it == pathways_.end()) {
      fail(ErrorCode::PathwayNotEstablished,
           "handshake between '" + south.str() + "' and '" + north.str() + "' did not complete");
    }
    return it->second.pathway;
  }

  // --- helpers --------------------------------------------------------------

  void count_decode(const ResourceId& id, SlotId slot) {
    ++decodes_[id];
    ++slot_decodes_[slot];
  }

  SlotId require_slot(const ResourceId& id) const {
    topo_.component_index(id);
    auto s = topo_.slot_of(id);
    if (!s) fail(ErrorCode::UnknownComponent, "'" + id.str() + "' is not installed in the stack");
    return *s;
  }

  void require_alive(const ResourceId& id) const {
    if (!topo_.component(topo_.component_index(id)).alive) {
      fail(ErrorCode::DeadComponent, "'" + id.str() + "' is dead");
    }
  }

  StackTopology topo_;
  SimConfig cfg_;
  tx::TrustedExchange tx_;
  Trace trace_;
  Ledger ledger_;

  double now_ = 0.0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t next_msg_ = 0;
  std::uint64_t serial_ = 0;
  std::priority_queue<PendingEvent, std::vector<PendingEvent>, std::greater<>> queue_;

  std::map<std::uint64_t, Message> messages_;
  std::map<SlotId, std::vector<std::uint64_t>> parked_;
  std::map<Pair, PathwayState> pathways_;
  std::map<Pair, std::uint64_t> epochs_;
  std::vector<std::pair<SlotId, SlotId>> wanted_;
  std::map<Pair, codec::ElisionContext> sender_ctx_;
  std::map<Pair, codec::ElisionContext> receiver_ctx_;
  std::map<std::size_t, CoreState> cores_;

  std::vector<MainResult> results_;
  std::map<ResourceId, std::size_t> decodes_;
  std::map<SlotId, std::size_t> slot_decodes_;
  std::map<ResourceId, std::vector<std::string>> relay_logs_;
};

}  // namespace nsvtp::sim
