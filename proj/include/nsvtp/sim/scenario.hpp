#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nsvtp/dvfs/model.hpp"
#include "nsvtp/error.hpp"
#include "nsvtp/scheme/blueprint.hpp"
#include "nsvtp/scheme/tweak.hpp"
#include "nsvtp/sim/blueprints.hpp"
#include "nsvtp/sim/simulator.hpp"

namespace nsvtp::sim {

struct ComponentSpec {
  std::string slot;  // empty for pool entries
  std::string id;
  std::string role;
  int layer = 0;
  int column = 0;
  Grade grade = Grade::Low;
  std::string blueprint_file;  // empty: generated for cpu, none otherwise
};

struct FailureSpec {
  std::string component;
  double at = 0.0;
  std::optional<double> rotate_after;  // seconds after the failure
};

struct ScenarioConfig {
  dvfs::ModelParams model;
  double t_comp = 1.0;
  double rho = 1.0;
  int cycles = 100;
  double workload_mips = 1.0;
  double delta = 0.01;
  bool nsvtp = true;
  tx::PathwayMode mode = tx::PathwayMode::ViaTX;
  bool encrypt = false;
  double hop_delay = 0.0;
  double tx_ttl = 60.0;
  std::uint64_t seed = 1;
  std::vector<ComponentSpec> stack;
  std::vector<std::pair<std::string, std::string>> links;
  std::vector<ComponentSpec> pool;
  std::vector<FailureSpec> failures;
  std::string south = "core";
  std::string north = "app";
  std::string trace_path;
  std::string report_path;
  std::filesystem::path base_dir;  // blueprint paths resolve against this

  dvfs::CyclePattern pattern() const { return {t_comp, rho, delta}; }
};

// Five-layer single column: app 4, runtime 3, os 2, hypervisor 1, core 0.
inline std::vector<ComponentSpec> default_stack(Grade core_grade = Grade::High) {
  return {
      {"core", "cpu-core-017", "cpu", 0, 0, core_grade, ""},
      {"hypervisor", "hypervisor-1", "hypervisor", 1, 0, Grade::Low, ""},
      {"os", "os-1", "os", 2, 0, Grade::Low, ""},
      {"runtime", "runtime-1", "runtime", 3, 0, Grade::Low, ""},
      {"app", "app-1", "app", 4, 0, Grade::Low, ""},
  };
}

namespace detail {

using nlohmann::json;

[[noreturn]] inline void config_error(const std::string& msg) { fail(ErrorCode::ConfigError, msg); }

inline void only_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) config_error(std::string(where) + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) {
      config_error("unknown field '" + it.key() + "' in " + std::string(where));
    }
  }
}

template <typename T>
T get(const json& j, std::string_view key, std::string_view where) {
  try {
    return j.at(std::string(key)).get<T>();
  } catch (const json::exception&) {
    config_error("field '" + std::string(key) + "' in " + std::string(where) + " has the wrong type");
  }
}

template <typename T>
void read(const json& j, std::string_view key, T& out, std::string_view where) {
  if (j.contains(std::string(key))) out = get<T>(j, key, where);
}

inline Grade parse_grade(const std::string& s) {
  if (s == "low") return Grade::Low;
  if (s == "high") return Grade::High;
  config_error("grade must be \"low\" or \"high\", got \"" + s + "\"");
}

inline tx::PathwayMode parse_mode(const std::string& s) {
  if (s == "via_tx") return tx::PathwayMode::ViaTX;
  if (s == "direct") return tx::PathwayMode::Direct;
  config_error("tx_mode must be \"via_tx\" or \"direct\", got \"" + s + "\"");
}

inline ComponentSpec parse_component(const json& j, bool in_pool) {
  const std::string_view where = in_pool ? "pool entry" : "stack entry";
  if (in_pool) {
    only_keys(j, where, {"id", "role", "grade", "blueprint"});
  } else {
    only_keys(j, where, {"slot", "id", "role", "layer", "column", "grade", "blueprint"});
  }
  ComponentSpec c;
  c.id = get<std::string>(j, "id", where);
  c.role = get<std::string>(j, "role", where);
  if (!in_pool) {
    c.slot = get<std::string>(j, "slot", where);
    c.layer = get<int>(j, "layer", where);
    read(j, "column", c.column, where);
    if (c.layer < 0) config_error("layer of '" + c.id + "' must be >= 0");
  }
  std::string grade = "low";
  read(j, "grade", grade, where);
  c.grade = parse_grade(grade);
  read(j, "blueprint", c.blueprint_file, where);
  return c;
}

}  // namespace detail

// Overlays `j` on `cfg`; fields absent from `j` keep their current values.
inline void apply_config_json(ScenarioConfig& cfg, const nlohmann::json& j) {
  using namespace detail;
  only_keys(j, "scenario", {"model", "workload", "delta", "nsvtp", "tx_mode", "encrypt",
                            "hop_delay", "tx_ttl", "seed", "core_grade", "stack", "links",
                            "pool", "failures", "south", "north", "outputs", "sweep"});
  if (j.contains("model")) {
    const auto& m = j["model"];
    only_keys(m, "model", {"p0", "p3", "f_min", "f_max", "n_dvfs", "l_max"});
    read(m, "p0", cfg.model.p0, "model");
    read(m, "p3", cfg.model.p3, "model");
    read(m, "f_min", cfg.model.f_min, "model");
    read(m, "f_max", cfg.model.f_max, "model");
    read(m, "n_dvfs", cfg.model.n_dvfs, "model");
    read(m, "l_max", cfg.model.l_max, "model");
  }
  if (j.contains("workload")) {
    const auto& w = j["workload"];
    only_keys(w, "workload", {"t_comp", "rho", "cycles", "mips"});
    read(w, "t_comp", cfg.t_comp, "workload");
    read(w, "rho", cfg.rho, "workload");
    read(w, "cycles", cfg.cycles, "workload");
    read(w, "mips", cfg.workload_mips, "workload");
  }
  read(j, "delta", cfg.delta, "scenario");
  read(j, "nsvtp", cfg.nsvtp, "scenario");
  if (j.contains("tx_mode")) cfg.mode = parse_mode(get<std::string>(j, "tx_mode", "scenario"));
  read(j, "encrypt", cfg.encrypt, "scenario");
  read(j, "hop_delay", cfg.hop_delay, "scenario");
  read(j, "tx_ttl", cfg.tx_ttl, "scenario");
  read(j, "seed", cfg.seed, "scenario");
  read(j, "south", cfg.south, "scenario");
  read(j, "north", cfg.north, "scenario");
  if (j.contains("core_grade")) {
    if (j.contains("stack")) config_error("core_grade only applies to the default stack");
    cfg.stack = default_stack(parse_grade(get<std::string>(j, "core_grade", "scenario")));
  }
  if (j.contains("stack")) {
    if (!j["stack"].is_array()) config_error("stack must be an array");
    cfg.stack.clear();
    for (const auto& e : j["stack"]) cfg.stack.push_back(parse_component(e, false));
  }
  if (j.contains("links")) {
    if (!j["links"].is_array()) config_error("links must be an array of [slot, slot] pairs");
    cfg.links.clear();
    for (const auto& l : j["links"]) {
      if (!l.is_array() || l.size() != 2 || !l[0].is_string() || !l[1].is_string()) {
        config_error("each link must be a [slot, slot] pair");
      }
      cfg.links.emplace_back(l[0].get<std::string>(), l[1].get<std::string>());
    }
  }
  if (j.contains("pool")) {
    if (!j["pool"].is_array()) config_error("pool must be an array");
    cfg.pool.clear();
    for (const auto& e : j["pool"]) cfg.pool.push_back(parse_component(e, true));
  }
  if (j.contains("failures")) {
    if (!j["failures"].is_array()) config_error("failures must be an array");
    cfg.failures.clear();
    for (const auto& f : j["failures"]) {
      only_keys(f, "failure", {"component", "at", "rotate_after"});
      FailureSpec s;
      s.component = get<std::string>(f, "component", "failure");
      s.at = get<double>(f, "at", "failure");
      if (f.contains("rotate_after")) s.rotate_after = get<double>(f, "rotate_after", "failure");
      cfg.failures.push_back(s);
    }
  }
  if (j.contains("outputs")) {
    const auto& o = j["outputs"];
    only_keys(o, "outputs", {"trace", "report"});
    read(o, "trace", cfg.trace_path, "outputs");
    read(o, "report", cfg.report_path, "outputs");
  }
}

inline ScenarioConfig default_scenario() {
  ScenarioConfig cfg;
  cfg.stack = default_stack();
  return cfg;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ConfigError, "cannot open '" + path.string() + "'");
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::ConfigError, "'" + path.string() + "' is not valid JSON");
  return j;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::ConfigError, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
  auto cfg = default_scenario();
  apply_config_json(cfg, read_json_file(path));
  cfg.base_dir = path.parent_path();
  return cfg;
}

// Fail-fast check of everything the modules would reject later.
inline void validate_scenario(const ScenarioConfig& cfg) {
  auto bad = [](const std::string& m) { fail(ErrorCode::ConfigError, m); };
  cfg.model.validate();
  cfg.pattern().validate();
  if (cfg.cycles < 1) bad("workload.cycles must be >= 1");
  if (!(cfg.workload_mips > 0) || !std::isfinite(cfg.workload_mips)) bad("workload.mips must be positive");
  if (!(cfg.hop_delay >= 0) || !std::isfinite(cfg.hop_delay)) bad("hop_delay must be >= 0");
  if (!(cfg.tx_ttl > 0)) bad("tx_ttl must be positive");
  if (cfg.stack.empty()) bad("stack is empty");
  if (cfg.nsvtp) dvfs::require_tweak_window(cfg.pattern());
  std::set<std::string> slots;
  for (const auto& c : cfg.stack) slots.insert(c.slot);
  if (!slots.count(cfg.south)) bad("south slot '" + cfg.south + "' is not in the stack");
  if (!slots.count(cfg.north)) bad("north slot '" + cfg.north + "' is not in the stack");
  for (const auto& f : cfg.failures) {
    if (!(f.at >= 0) || !std::isfinite(f.at)) bad("failure time must be >= 0");
    if (f.rotate_after && !(*f.rotate_after >= 0)) bad("rotate_after must be >= 0");
  }
}

inline Component make_component(const ScenarioConfig& cfg, const ComponentSpec& spec) {
  Component c;
  c.id = ResourceId(spec.id);
  c.role = spec.role;
  c.grade = spec.grade;
  if (!spec.blueprint_file.empty()) {
    auto path = std::filesystem::path(spec.blueprint_file);
    if (path.is_relative()) path = cfg.base_dir / path;
    c.blueprint = scheme::parse_blueprint(read_text_file(path));
  } else if (spec.role == kCoreRole) {
    c.blueprint = cpu_blueprint(cfg.model, cfg.delta, spec.grade);
  }
  return c;
}

inline StackTopology build_topology(const ScenarioConfig& cfg) {
  StackTopology t;
  for (const auto& s : cfg.stack) {
    t.add_slot(s.slot, LayerIndex{s.layer}, s.column, make_component(cfg, s));
  }
  for (const auto& s : cfg.pool) t.add_spare(make_component(cfg, s));
  t.link_columns();
  for (const auto& [a, b] : cfg.links) t.link(t.slot_named(a), t.slot_named(b));
  t.check_grade_invariant();
  return t;
}

inline SimConfig sim_config(const ScenarioConfig& cfg) {
  SimConfig s;
  s.model = cfg.model;
  s.hop_delay = cfg.hop_delay;
  s.mode = cfg.mode;
  s.encrypt = cfg.encrypt;
  s.tx_ttl = cfg.tx_ttl;
  s.seed = cfg.seed;
  s.cores = dvfs::allocate_cores(cfg.workload_mips, cfg.model.l_max).cores;
  return s;
}

// The north-side controller: one main call per cycle, and when a pathway is
// up and the core's blueprint offers dvfs.set_freq, a step down to the
// lowest frequency at the start of each commute window and a step back up
// timed to land at its end.
class DvfsWorkload {
 public:
  DvfsWorkload(Simulator& sim, SlotId north, SlotId south, dvfs::CyclePattern pattern, int cycles,
               bool nsvtp)
      : sim_(sim), north_(north), south_(south), c_(pattern), cycles_(cycles), nsvtp_(nsvtp) {}

  double horizon() const { return cycles_ * c_.period(); }

  void install() {
    for (int k = 0; k < cycles_; ++k) {
      const double start = k * c_.period();
      sim_.schedule(start, [this, k] { call(k); });
      if (nsvtp_) {
        const double commute = start + c_.t_comp;
        const double end = (k + 1) * c_.period();
        sim_.schedule(commute, [this, commute, end] { step_down(commute, end); });
      }
    }
  }

 private:
  struct Plan {
    ResourceId south;
    ResourceId north;
    double low = 0.0;
    double high = 0.0;
    double latency = 0.0;
  };

  void call(int k) {
    char name[32];
    std::snprintf(name, sizeof name, "task-%06d", k);
    sim_.post_main_call(sim_.installed(north_).id, sim_.installed(south_).id,
                        {ResourceId(name), std::nullopt});
  }

  std::optional<Plan> plan() const {
    const auto& s = sim_.installed(south_);
    const auto& n = sim_.installed(north_);
    if (!s.alive || !n.alive) return std::nullopt;
    const auto* view = sim_.north_view(s.id, n.id);
    if (!view) return std::nullopt;
    const auto* scheme = view->find_scheme("dvfs");
    if (!scheme || !scheme->find_formula("set_freq")) return std::nullopt;
    const auto* step = scheme->find_param("freq_step");
    const auto* lat = scheme->find_param("latency");
    if (!step || !lat) return std::nullopt;
    return Plan{s.id, n.id, lowest(step->feasible), highest(step->feasible), lowest(lat->feasible)};
  }

  static double lowest(const scheme::FeasibleSet& f) {
    return f.is_finite() ? f.as_finite().values.front() : f.as_interval().lo;
  }
  static double highest(const scheme::FeasibleSet& f) {
    return f.is_finite() ? f.as_finite().values.back() : f.as_interval().hi;
  }

  void send(const Plan& p, double freq) {
    scheme::Tweak t{"dvfs", "set_freq", {{"freq_step", freq}, {"latency", p.latency}}};
    auto cap = codec::Capsule::southwise({scheme::print_tweak(t)}, std::nullopt,
                                         codec::CapsuleFlags::per_segment(true, sim_.config().encrypt));
    sim_.post_nsvtp(p.north, p.south, cap);
  }

  void step_down(double commute, double end) {
    const auto p = plan();
    if (!p) return;
    send(*p, p->low);
    const double up = std::max(commute + p->latency, end - p->latency);
    sim_.schedule(up, [this] {
      if (const auto q = plan()) send(*q, q->high);
    });
  }

  Simulator& sim_;
  SlotId north_;
  SlotId south_;
  dvfs::CyclePattern c_;
  int cycles_;
  bool nsvtp_;
};

struct RunResult {
  double energy_j = 0.0;
  std::vector<MainResult> results;
  std::size_t middle_decodes = 0;
  std::size_t queued_calls = 0;
  Trace trace;
};

// One complete simulation of the scenario with NSVTP forced on or off.
inline RunResult run_once(const ScenarioConfig& cfg, bool nsvtp) {
  Simulator sim(build_topology(cfg), sim_config(cfg));
  const auto& topo = sim.topology();
  const auto south = topo.slot_named(cfg.south);
  const auto north = topo.slot_named(cfg.north);
  DvfsWorkload wl(sim, north, south, cfg.pattern(), cfg.cycles, nsvtp);
  sim.set_horizon(wl.horizon());
  if (nsvtp) sim.maintain_pathway(south, north, 0.0);
  wl.install();
  for (const auto& f : cfg.failures) {
    const auto id = ResourceId(f.component);
    sim.fail_component(id, f.at);
    if (f.rotate_after) {
      sim.schedule(f.at + *f.rotate_after, [&sim, id] { sim.rotate_component(id); });
    }
  }
  sim.run();
  RunResult r;
  r.energy_j = sim.energy_at_horizon();
  r.results = sim.main_results();
  for (SlotId s = 0; s < topo.slots().size(); ++s) {
    if (s != south && s != north) r.middle_decodes += sim.slot_decode_count(s);
  }
  r.queued_calls = sim.queued_calls();
  r.trace = sim.trace();
  return r;
}

struct SimulationReport {
  double baseline_j = 0.0;
  double nsvtp_j = 0.0;
  double eta_sim = 1.0;
  double eta_closed_form = 1.0;
  double abs_diff = 0.0;
  std::size_t middle_layer_decodes = 0;
  std::size_t completed_calls = 0;
  std::size_t queued_calls = 0;
  bool main_results_identical = true;
  Trace trace;  // of the configured run

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["baseline_J"] = baseline_j;
    j["nsvtp_J"] = nsvtp_j;
    j["eta_sim"] = eta_sim;
    j["eta_closed_form"] = eta_closed_form;
    j["abs_diff"] = abs_diff;
    j["middle_layer_decodes"] = middle_layer_decodes;
    j["completed_calls"] = completed_calls;
    j["queued_calls"] = queued_calls;
    j["main_results_identical"] = main_results_identical;
    return j;
  }
};

inline std::vector<std::string> sorted_results(const std::vector<MainResult>& rs) {
  std::vector<std::string> out;
  for (const auto& r : rs) out.push_back(r.payload + "=" + r.result);
  std::sort(out.begin(), out.end());
  return out;
}

// Baseline (NSVTP off) against the configured run. The closed form uses the
// model exponent so it agrees with the power formula in the blueprint.
inline SimulationReport simulate(const ScenarioConfig& cfg) {
  validate_scenario(cfg);
  const auto base = run_once(cfg, false);
  const auto run = cfg.nsvtp ? run_once(cfg, true) : base;
  SimulationReport rep;
  rep.baseline_j = base.energy_j;
  rep.nsvtp_j = run.energy_j;
  rep.eta_sim = run.energy_j / base.energy_j;
  rep.eta_closed_form =
      cfg.nsvtp ? dvfs::eta(cfg.model, cfg.pattern(), dvfs::ExponentPolicy::ModelExponent) : 1.0;
  rep.abs_diff = std::abs(rep.eta_sim - rep.eta_closed_form);
  rep.middle_layer_decodes = run.middle_decodes;
  rep.completed_calls = run.results.size();
  rep.queued_calls = run.queued_calls;
  rep.main_results_identical = sorted_results(base.results) == sorted_results(run.results);
  rep.trace = run.trace;
  return rep;
}

}  // namespace nsvtp::sim
