#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>

#include "nsvtp/sim/scenario.hpp"
#include "nsvtp/sim/simulator.hpp"

using namespace nsvtp;
using namespace nsvtp::sim;
using codec::Capsule;
using codec::CapsuleFlags;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an nsvtp::Error";
  return ErrorCode::ConfigError;
}

const ResourceId kCore("cpu-core-017");
const ResourceId kHyper("hypervisor-1");
const ResourceId kOs("os-1");
const ResourceId kRuntime("runtime-1");
const ResourceId kApp("app-1");

ComponentSpec spare(std::string id, Grade g) { return {"", std::move(id), "cpu", 0, 0, g, ""}; }

Simulator make(const ScenarioConfig& cfg) { return Simulator(build_topology(cfg), sim_config(cfg)); }

Simulator make(Grade core = Grade::High, std::vector<ComponentSpec> pool = {}) {
  auto cfg = default_scenario();
  cfg.stack = default_stack(core);
  cfg.pool = std::move(pool);
  return make(cfg);
}

ExtendedResourceId bare(std::string name) { return {ResourceId(std::move(name)), std::nullopt}; }

std::vector<const TraceEvent*> events_of(const Trace& t, std::string_view kind) {
  std::vector<const TraceEvent*> out;
  for (const auto& e : t.events()) {
    if (e.kind == kind) out.push_back(&e);
  }
  return out;
}

std::string tweak_text(double freq, double latency) {
  return scheme::print_tweak({"dvfs", "set_freq", {{"freq_step", freq}, {"latency", latency}}});
}

}  // namespace

TEST(Relay, AppToCoreIsFourAdjacentHops) {
  auto s = make();
  const auto tr = s.deliver_main_call(kApp, kCore, bare("task-1"));
  ASSERT_TRUE(tr.delivered);
  ASSERT_EQ(tr.hops.size(), 4u);
  const int expect_layers[] = {4, 3, 2, 1, 0};
  for (std::size_t i = 0; i < tr.hops.size(); ++i) {
    EXPECT_EQ(tr.hops[i].from_layer.value, expect_layers[i]);
    EXPECT_EQ(tr.hops[i].to_layer.value, expect_layers[i + 1]);
    EXPECT_EQ(std::abs(tr.hops[i].from_layer.value - tr.hops[i].to_layer.value), 1);
  }
  ASSERT_EQ(s.main_results().size(), 1u);
  EXPECT_EQ(s.main_results()[0].result, main_function("cpu", "task-1"));
}

TEST(Relay, SourceEqualsDestination) {
  auto s = make();
  const auto tr = s.deliver_main_call(kOs, kOs, bare("local"));
  EXPECT_TRUE(tr.delivered);
  EXPECT_TRUE(tr.hops.empty());
}

TEST(Relay, AppendixIsByteIdenticalAndUnread) {
  auto s = make();
  std::string blueprint;
  for (int i = 0; blueprint.size() < 1024; ++i) blueprint += "param p" + std::to_string(i) + ";";
  const auto cap = Capsule::northwise(std::string_view(blueprint), std::nullopt, CapsuleFlags::per_segment(false));
  const auto tr = s.deliver_main_call(kCore, kApp, {kCore, cap});
  ASSERT_TRUE(tr.delivered);
  EXPECT_GT(tr.bytes_at_source.size(), 1024u);
  EXPECT_EQ(tr.bytes_at_destination, tr.bytes_at_source);
  for (const auto& mid : {kHyper, kOs, kRuntime}) {
    ASSERT_EQ(s.relay_log(mid).size(), 1u);
    EXPECT_EQ(s.relay_log(mid)[0], "cpu-core-017");
    EXPECT_EQ(s.decode_count(mid), 0u);
  }
}

TEST(Relay, HopDelayAccumulates) {
  auto cfg = default_scenario();
  cfg.hop_delay = 0.25;
  auto s = make(cfg);
  const auto tr = s.deliver_main_call(kApp, kCore, bare("slow"));
  EXPECT_DOUBLE_EQ(tr.delivered_at, 1.0);
}

TEST(Relay, NoPathBetweenUnlinkedSlots) {
  StackTopology t;
  t.add_slot("a", LayerIndex{0}, 0, {ResourceId("a"), "x", Grade::Low, std::nullopt, {}, true});
  t.add_slot("b", LayerIndex{1}, 1, {ResourceId("b"), "y", Grade::Low, std::nullopt, {}, true});
  Simulator s(std::move(t), {});
  EXPECT_EQ(code_of([&] { s.deliver_main_call(ResourceId("a"), ResourceId("b"), bare("x")); }),
            ErrorCode::NoPath);
}

TEST(Topology, AdjacencyViolation) {
  StackTopology t;
  const auto a = t.add_slot("a", LayerIndex{0}, 0, {ResourceId("a"), "x", Grade::Low, std::nullopt, {}, true});
  const auto b = t.add_slot("b", LayerIndex{2}, 0, {ResourceId("b"), "y", Grade::Low, std::nullopt, {}, true});
  EXPECT_EQ(code_of([&] { t.link(a, b); }), ErrorCode::AdjacencyViolation);
  auto cfg = default_scenario();
  cfg.links.push_back({"core", "os"});
  EXPECT_EQ(code_of([&] { build_topology(cfg); }), ErrorCode::AdjacencyViolation);
}

TEST(Topology, MultiColumn) {
  auto cfg = default_scenario();
  cfg.stack.push_back({"app2", "app-2", "app", 4, 1, Grade::Low, ""});
  cfg.stack.push_back({"runtime2", "runtime-2", "runtime", 3, 1, Grade::Low, ""});
  cfg.links.push_back({"runtime2", "os"});
  auto s = make(cfg);
  const auto tr = s.deliver_main_call(ResourceId("app-2"), kCore, bare("col1"));
  ASSERT_EQ(tr.hops.size(), 4u);
  EXPECT_EQ(tr.hops[0].to, ResourceId("runtime-2"));
  EXPECT_EQ(tr.hops[1].to, kOs);
  // the two apps meet through the shared os slot
  const auto across = s.deliver_main_call(ResourceId("app-2"), kApp, bare("across"));
  EXPECT_EQ(across.hops.size(), 4u);
}

TEST(Topology, GradeInvariant) {
  StackTopology t;
  const dvfs::ModelParams p;
  t.add_slot("core", LayerIndex{0}, 0,
             {ResourceId("lo"), "cpu", Grade::Low, cpu_blueprint(p, 0.01, Grade::Low), {}, true});
  auto thin = scheme::parse_blueprint("blueprint \"thin\" rev 1 { scheme power { } }");
  t.add_spare({ResourceId("hi"), "cpu", Grade::High, thin, {}, true});
  EXPECT_EQ(code_of([&] { t.check_grade_invariant(); }), ErrorCode::GradeInvariant);
  EXPECT_EQ(code_of([&] { Simulator(t, {}); }), ErrorCode::GradeInvariant);
}

TEST(Failure, CallsThroughDeadCoreAreQueuedNotLost) {
  auto s = make(Grade::High, {spare("cpu-core-018", Grade::High)});
  s.fail_component(kCore, 0.0);
  for (int i = 0; i < 3; ++i) s.post_main_call(kApp, kCore, bare("q" + std::to_string(i)));
  s.run();
  EXPECT_EQ(s.queued_calls(), 3u);
  EXPECT_TRUE(s.main_results().empty());
  EXPECT_EQ(events_of(s.trace(), kind::MainCallQueued).size(), 3u);

  s.rotate_component(kCore);
  s.run();
  EXPECT_EQ(s.queued_calls(), 0u);
  ASSERT_EQ(s.main_results().size(), 3u);
  for (const auto& r : s.main_results()) EXPECT_EQ(r.result, main_function("cpu", r.payload));
}

TEST(Failure, SpareInPoolAffectsNothing) {
  auto s = make(Grade::High, {spare("cpu-core-018", Grade::High)});
  s.fail_component(ResourceId("cpu-core-018"), 0.0);
  s.deliver_main_call(kApp, kCore, bare("fine"));
  EXPECT_EQ(s.queued_calls(), 0u);
  EXPECT_EQ(s.main_results().size(), 1u);
}

TEST(Failure, DoubleFailureAndDeadEndpoints) {
  auto s = make();
  s.fail_component(kOs, 0.0);
  EXPECT_EQ(code_of([&] { s.fail_component(kOs, 1.0); }), ErrorCode::AlreadyDead);
  EXPECT_EQ(code_of([&] { s.deliver_main_call(kApp, kOs, bare("x")); }), ErrorCode::DeadComponent);
  EXPECT_EQ(code_of([&] { s.fail_component(ResourceId("nobody"), 1.0); }), ErrorCode::UnknownComponent);
}

TEST(Failure, ScheduledFailureHappensAtItsTime) {
  auto s = make();
  s.fail_component(kOs, 2.0);
  s.run_until(1.0);
  EXPECT_TRUE(s.component(kOs).alive);
  s.run_until(2.0);
  EXPECT_FALSE(s.component(kOs).alive);
  const auto f = events_of(s.trace(), kind::Failure);
  ASSERT_EQ(f.size(), 1u);
  EXPECT_DOUBLE_EQ(f[0]->time, 2.0);
}

TEST(Rotation, PrefersSameGrade) {
  auto s = make(Grade::Low, {spare("spare-high", Grade::High), spare("spare-low", Grade::Low)});
  const auto app_state = s.component(kApp).state;
  s.fail_component(kCore, 0.0);
  EXPECT_EQ(code_of([&] { s.rotate_component(kOs); }), ErrorCode::ComponentAlive);
  const auto& fresh = s.rotate_component(kCore);
  EXPECT_EQ(fresh.id, ResourceId("spare-low"));
  EXPECT_EQ(s.installed(s.topology().slot_named("core")).id, ResourceId("spare-low"));
  EXPECT_EQ(s.component(kApp).state, app_state);
  EXPECT_EQ(s.topology().pool().size(), 1u);
  // the overlying component keeps addressing the slot
  s.deliver_main_call(kApp, ResourceId("spare-low"), bare("after"));
  EXPECT_EQ(s.main_results().back().result, main_function("cpu", "after"));
}

TEST(Rotation, FallsBackToHighGradeWithDvfs) {
  auto s = make(Grade::Low, {spare("spare-high", Grade::High)});
  EXPECT_FALSE(s.component(kCore).blueprint->find_scheme("dvfs"));
  s.fail_component(kCore, 0.0);
  const auto& fresh = s.rotate_component(kCore);
  EXPECT_EQ(fresh.grade, Grade::High);
  ASSERT_TRUE(fresh.blueprint);
  EXPECT_TRUE(fresh.blueprint->find_scheme("dvfs"));
  const auto rot = events_of(s.trace(), kind::Rotation);
  ASSERT_EQ(rot.size(), 1u);
  EXPECT_EQ(rot[0]->detail["upgraded"], true);
}

TEST(Rotation, NeverDowngradesAndReportsExhaustion) {
  auto s = make(Grade::High, {spare("spare-low", Grade::Low)});
  s.fail_component(kCore, 0.0);
  EXPECT_EQ(code_of([&] { s.rotate_component(kCore); }), ErrorCode::PoolExhausted);
  auto empty = make();
  empty.fail_component(kCore, 0.0);
  EXPECT_EQ(code_of([&] { empty.rotate_component(kCore); }), ErrorCode::PoolExhausted);
}

TEST(Rotation, FreshBlueprintTravelsNorthwise) {
  auto cfg = default_scenario();
  cfg.stack = default_stack(Grade::Low);
  cfg.pool = {spare("spare-high", Grade::High)};
  auto s = make(cfg);
  const auto core = s.topology().slot_named("core");
  const auto app = s.topology().slot_named("app");
  s.maintain_pathway(core, app, 0.0);
  s.run();
  ASSERT_TRUE(s.north_view(kCore, kApp));
  EXPECT_FALSE(s.north_view(kCore, kApp)->find_scheme("dvfs"));
  s.fail_component(kCore, 1.0);
  s.schedule(1.5, [&] { s.rotate_component(kCore); });
  s.run();
  const auto* view = s.north_view(ResourceId("spare-high"), kApp);
  ASSERT_TRUE(view);
  EXPECT_TRUE(view->find_scheme("dvfs"));
  const auto bps = events_of(s.trace(), kind::BlueprintReceived);
  ASSERT_EQ(bps.size(), 2u);
  EXPECT_EQ(bps[1]->from, "spare-high");
  EXPECT_GE(bps[1]->time, 1.5);
}

TEST(Nsvtp, NorthwiseCapsuleOnlyRelayedByMiddles) {
  auto s = make();
  s.establish(kCore, kApp);
  codec::StatusRecord st;
  st.set("frequency", 3);
  const auto text = s.component(kCore).blueprint_text();
  const auto tr = s.send_nsvtp(kCore, kApp, Capsule::northwise(std::string_view(text), st));
  ASSERT_TRUE(tr.delivered);
  EXPECT_EQ(tr.bytes_at_destination, tr.bytes_at_source);
  for (const auto& mid : {kHyper, kOs, kRuntime}) {
    EXPECT_EQ(s.decode_count(mid), 0u);
    for (const auto& name : s.relay_log(mid)) EXPECT_EQ(name.find('#'), std::string::npos);
  }
  EXPECT_GE(s.decode_count(kApp), 1u);
}

TEST(Nsvtp, BlueprintIsElidedOnRepeat) {
  auto s = make();
  s.establish(kCore, kApp);
  const auto text = s.component(kCore).blueprint_text();
  const auto tr = s.send_nsvtp(kCore, kApp, Capsule::northwise(std::string_view(text)));
  const auto appendix = codec::base64url_decode(tr.bytes_at_source.substr(tr.bytes_at_source.find('#') + 1));
  ASSERT_TRUE(appendix);
  EXPECT_EQ(*appendix, (Bytes{0x01, 0x01, 0x03, 0x10, 0x00, 0x00}));
}

TEST(Nsvtp, TweakStartsAndFinishesFrequencyChange) {
  auto cfg = default_scenario();
  cfg.delta = 0.02;
  auto s = make(cfg);
  s.establish(kCore, kApp);
  s.run_until(5.0);
  s.send_nsvtp(kApp, kCore, Capsule::southwise({tweak_text(1.0, 0.02)}));
  s.run();
  const auto start = events_of(s.trace(), kind::FrequencyChangeStart);
  const auto done = events_of(s.trace(), kind::FrequencyChangeDone);
  ASSERT_EQ(start.size(), 1u);
  ASSERT_EQ(done.size(), 1u);
  EXPECT_DOUBLE_EQ(start[0]->time, 5.0);
  EXPECT_DOUBLE_EQ(done[0]->time, 5.02);
  EXPECT_EQ(s.component(kCore).state.at("frequency"), 1.0);
  // the core acknowledges with a status record; the blueprint rides elided
  const auto acks = events_of(s.trace(), kind::Nsvtp);
  ASSERT_FALSE(acks.empty());
  EXPECT_EQ(acks.back()->detail["status"]["frequency"], 1.0);
}

TEST(Nsvtp, TweakLeavesMainFunctionAlone) {
  auto s = make();
  s.establish(kCore, kApp);
  s.deliver_main_call(kApp, kCore, bare("before"));
  s.send_nsvtp(kApp, kCore, Capsule::southwise({tweak_text(2.0, 0.01)}));
  s.run();
  s.deliver_main_call(kApp, kCore, bare("before"));
  ASSERT_EQ(s.main_results().size(), 2u);
  EXPECT_EQ(s.main_results()[0].result, s.main_results()[1].result);
}

TEST(Nsvtp, RejectedTweak) {
  auto s = make();
  s.establish(kCore, kApp);
  EXPECT_EQ(code_of([&] { s.send_nsvtp(kApp, kCore, Capsule::southwise({tweak_text(1.0, 0.5)})); }),
            ErrorCode::TweakRejected);
  EXPECT_EQ(code_of([&] {
              s.send_nsvtp(kApp, kCore, Capsule::southwise({"tweak turbo.go { x = 1; }"}));
            }),
            ErrorCode::TweakRejected);
}

TEST(Nsvtp, NoPathwayNoTraffic) {
  auto s = make();
  EXPECT_EQ(code_of([&] { s.send_nsvtp(kApp, kCore, Capsule::southwise({tweak_text(1.0, 0.01)})); }),
            ErrorCode::PathwayNotEstablished);
}

TEST(Nsvtp, DirectionMustMatch) {
  auto s = make();
  s.establish(kCore, kApp);
  EXPECT_EQ(code_of([&] { s.send_nsvtp(kApp, kCore, Capsule::northwise(std::string_view("x"))); }),
            ErrorCode::InvalidCapsule);
}

TEST(Nsvtp, EncryptedPathway) {
  auto cfg = default_scenario();
  cfg.encrypt = true;
  auto s = make(cfg);
  const auto& pw = s.establish(kCore, kApp);
  EXPECT_FALSE(pw.north_key.empty());
  EXPECT_FALSE(pw.south_key.empty());
  s.send_nsvtp(kApp, kCore, Capsule::southwise({tweak_text(1.0, 0.01)}, std::nullopt, CapsuleFlags::per_segment(true, true)));
  s.run();
  EXPECT_EQ(s.component(kCore).state.at("frequency"), 1.0);
}

TEST(Establish, ViaTxHandshakeSteps) {
  auto s = make();
  s.establish_via_tx(kCore, kApp);
  std::vector<std::string> kinds;
  for (const auto& e : s.trace().events()) {
    if (e.kind != kind::RelayHop) kinds.push_back(e.kind);
  }
  const std::vector<std::string> expect{"tx.deposit",  "relay_key_received", "tx.claim",
                                        "tx.release",  "tx.notify_south",    "blueprint_received",
                                        "pathway_established"};
  EXPECT_EQ(kinds, expect);
  EXPECT_EQ(s.exchange().live_count(s.now()), 0u);
}

TEST(Establish, ImpostorClaimantIsRejected) {
  auto s = make();
  EXPECT_EQ(code_of([&] { s.establish_via_tx(kCore, kApp, kOs); }), ErrorCode::LayerMismatch);
  EXPECT_FALSE(s.pathway(kCore, kApp));
}

TEST(Establish, DirectModeSkipsTheExchange) {
  auto cfg = default_scenario();
  cfg.mode = tx::PathwayMode::Direct;
  auto s = make(cfg);
  s.establish(kCore, kApp);
  for (const auto& e : s.trace().events()) EXPECT_NE(e.kind.rfind("tx.", 0), 0u) << e.kind;
  s.send_nsvtp(kApp, kCore, Capsule::southwise({tweak_text(1.0, 0.01)}));
  s.run();
  EXPECT_EQ(s.component(kCore).state.at("frequency"), 1.0);
}

TEST(Establish, DirectWithDeadSouth) {
  auto s = make();
  s.fail_component(kCore, 0.0);
  EXPECT_EQ(code_of([&] { s.establish_direct(kCore, kApp); }), ErrorCode::DeadComponent);
}

TEST(Establish, FailureClosesPathway) {
  auto s = make();
  s.establish(kCore, kApp);
  s.fail_component(kCore, 0.0);
  EXPECT_FALSE(s.pathway(kCore, kApp));
  EXPECT_EQ(events_of(s.trace(), kind::PathwayClosed).size(), 1u);
}

TEST(Run, ViaTxAndDirectAgreeAfterInitiation) {
  auto cfg = default_scenario();
  cfg.cycles = 10;
  auto direct = cfg;
  direct.mode = tx::PathwayMode::Direct;
  auto strip = [](const Trace& t) {
    std::vector<std::string> out;
    for (const auto& e : t.events()) {
      if (e.phase == Phase::Init) continue;
      auto j = e.to_json();
      j.erase("seq");
      out.push_back(j.dump());
    }
    return out;
  };
  const auto a = run_once(cfg, true);
  const auto b = run_once(direct, true);
  EXPECT_EQ(strip(a.trace), strip(b.trace));
  EXPECT_GT(a.trace.count(kind::TweakApplied), 0u);
}

TEST(Run, DeterministicTrace) {
  auto cfg = default_scenario();
  cfg.cycles = 20;
  cfg.failures.push_back({"os-1", 3.3, 0.4});
  cfg.pool.push_back({"", "os-2", "os", 0, 0, Grade::Low, ""});
  EXPECT_EQ(run_once(cfg, true).trace.to_jsonl(), run_once(cfg, true).trace.to_jsonl());
}

TEST(Run, NsvtpDoesNotChangeMainResults) {
  auto cfg = default_scenario();
  cfg.cycles = 30;
  const auto on = run_once(cfg, true);
  const auto off = run_once(cfg, false);
  EXPECT_EQ(on.results.size(), 30u);
  EXPECT_EQ(sorted_results(on.results), sorted_results(off.results));
  EXPECT_EQ(on.middle_decodes, 0u);
  EXPECT_LT(on.energy_j, off.energy_j);
}

TEST(Run, RotationPreservesResults) {
  auto cfg = default_scenario();
  cfg.cycles = 30;
  const auto clean = run_once(cfg, true);
  for (const Grade g : {Grade::High, Grade::Low}) {
    auto broken = cfg;
    broken.stack = default_stack(g);
    broken.pool = {spare("cpu-core-099", g)};
    broken.failures.push_back({"cpu-core-017", 10.5, 2.25});
    const auto r = run_once(broken, true);
    EXPECT_EQ(sorted_results(r.results), sorted_results(clean.results));
    EXPECT_EQ(r.queued_calls, 0u);
    EXPECT_EQ(r.trace.count(kind::Rotation), 1u);
  }
}

TEST(Run, EnergyMatchesClosedForm) {
  auto cfg = default_scenario();
  const auto rep = simulate(cfg);
  EXPECT_LT(rep.abs_diff, 1e-9);
  EXPECT_NEAR(rep.baseline_j, 100 * 500.0, 1e-6);
  EXPECT_TRUE(rep.main_results_identical);
  EXPECT_EQ(rep.middle_layer_decodes, 0u);
  cfg.nsvtp = false;
  EXPECT_EQ(simulate(cfg).eta_sim, 1.0);
}

TEST(Run, LowGradeCoreGetsNoTweaks) {
  auto cfg = default_scenario();
  cfg.stack = default_stack(Grade::Low);
  cfg.cycles = 5;
  const auto rep = simulate(cfg);
  EXPECT_EQ(rep.eta_sim, 1.0);
  EXPECT_EQ(rep.trace.count(kind::TweakApplied), 0u);
}

TEST(Scenario, ConfigErrors) {
  auto cfg = default_scenario();
  cfg.delta = 0.6;  // 2 delta exceeds the 1 s commute window
  EXPECT_EQ(code_of([&] { validate_scenario(cfg); }), ErrorCode::InfeasibleTweakWindow);
  cfg = default_scenario();
  cfg.north = "nowhere";
  EXPECT_EQ(code_of([&] { validate_scenario(cfg); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([&] { apply_config_json(cfg, nlohmann::json::parse(R"({"bogus": 1})")); }),
            ErrorCode::ConfigError);
  EXPECT_EQ(code_of([&] { apply_config_json(cfg, nlohmann::json::parse(R"({"tx_mode": "carrier"})")); }),
            ErrorCode::ConfigError);
}

TEST(Scenario, JsonOverridesDefaults) {
  auto cfg = default_scenario();
  apply_config_json(cfg, nlohmann::json::parse(R"({
    "workload": {"t_comp": 2, "rho": 0.5, "cycles": 7},
    "delta": 0.05, "tx_mode": "direct", "core_grade": "low",
    "pool": [{"id": "spare", "role": "cpu", "grade": "high"}],
    "failures": [{"component": "cpu-core-017", "at": 3, "rotate_after": 1}]
  })"));
  EXPECT_EQ(cfg.t_comp, 2.0);
  EXPECT_EQ(cfg.rho, 0.5);
  EXPECT_EQ(cfg.cycles, 7);
  EXPECT_EQ(cfg.delta, 0.05);
  EXPECT_EQ(cfg.mode, tx::PathwayMode::Direct);
  EXPECT_EQ(cfg.stack[0].grade, Grade::Low);
  ASSERT_EQ(cfg.pool.size(), 1u);
  ASSERT_EQ(cfg.failures.size(), 1u);
  EXPECT_EQ(cfg.failures[0].rotate_after, 1.0);
}
