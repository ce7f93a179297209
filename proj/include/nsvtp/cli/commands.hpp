#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nsvtp/codec/capsule.hpp"
#include "nsvtp/dvfs/sweep.hpp"
#include "nsvtp/error.hpp"
#include "nsvtp/scheme/blueprint.hpp"
#include "nsvtp/scheme/tweak.hpp"
#include "nsvtp/sim/scenario.hpp"

namespace nsvtp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

// Config and parse problems exit 2; everything else a module raises exits 1.
inline int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::ConfigError:
    case ErrorCode::SyntaxError:
      return kExitConfig;
    default:
      return kExitRuntime;
  }
}

inline std::optional<Bytes> from_hex(std::string_view s) {
  if (s.size() % 2) return std::nullopt;
  Bytes out;
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  for (std::size_t i = 0; i < s.size(); i += 2) {
    const int hi = nib(s[i]);
    const int lo = nib(s[i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out.push_back(static_cast<std::uint8_t>(hi * 16 + lo));
  }
  return out;
}

inline void write_file(const std::string& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::ConfigError, "cannot write '" + path + "'");
  out << data;
}

// --- sweep -------------------------------------------------------------------

struct SweepOptions {
  dvfs::ModelParams model;
  double rho_min = 0.1;
  double rho_max = 10.0;
  int rho_steps = 25;
  double ratio_min = 10.0;
  double ratio_max = 1000.0;
  int ratio_steps = 25;
  bool generalized_exponent = false;
  std::string out;  // empty: CSV to stdout
};

inline void apply_sweep_json(SweepOptions& o, const nlohmann::json& j) {
  using sim::detail::read;
  if (!j.is_object()) fail(ErrorCode::ConfigError, "config must be a JSON object");
  if (j.contains("model")) {
    sim::ScenarioConfig tmp;
    tmp.model = o.model;
    sim::apply_config_json(tmp, nlohmann::json{{"model", j["model"]}});
    o.model = tmp.model;
  }
  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    sim::detail::only_keys(s, "sweep", {"rho_min", "rho_max", "rho_steps", "ratio_min", "ratio_max",
                                        "ratio_steps", "generalized_exponent", "out"});
    read(s, "rho_min", o.rho_min, "sweep");
    read(s, "rho_max", o.rho_max, "sweep");
    read(s, "rho_steps", o.rho_steps, "sweep");
    read(s, "ratio_min", o.ratio_min, "sweep");
    read(s, "ratio_max", o.ratio_max, "sweep");
    read(s, "ratio_steps", o.ratio_steps, "sweep");
    read(s, "generalized_exponent", o.generalized_exponent, "sweep");
    read(s, "out", o.out, "sweep");
  }
}

inline std::string sweep_summary(const dvfs::SweepGrid& g) {
  char buf[512];
  const auto lo = g.min_cell();
  const auto hi = g.max_cell();
  if (!lo) {
    std::snprintf(buf, sizeof buf, "cells=%zu feasible=0 (no feasible cell)", g.cells.size());
    return buf;
  }
  std::snprintf(buf, sizeof buf,
                "cells=%zu feasible=%zu min_eta=%.6f at rho=%.6g tcomp_over_delta=%.6g "
                "max_eta=%.6f at rho=%.6g tcomp_over_delta=%.6g",
                g.cells.size(), g.feasible_count(), lo->eta, lo->rho, lo->tcomp_over_delta, hi->eta,
                hi->rho, hi->tcomp_over_delta);
  return buf;
}

inline int cmd_sweep(const SweepOptions& o, std::ostream& out, std::ostream& err) {
  const auto policy =
      o.generalized_exponent ? dvfs::ExponentPolicy::ModelExponent : dvfs::ExponentPolicy::Cubic;
  const auto grid = dvfs::sweep_eta(o.model, dvfs::log_space(o.rho_min, o.rho_max, o.rho_steps),
                                    dvfs::log_space(o.ratio_min, o.ratio_max, o.ratio_steps), policy);
  std::ostringstream csv;
  dvfs::write_sweep_csv(csv, grid);
  if (o.out.empty()) {
    out << csv.str();
    err << sweep_summary(grid) << '\n';
  } else {
    write_file(o.out, csv.str());
    out << sweep_summary(grid) << '\n';
  }
  if (grid.feasible_count() == 0) {
    err << "InfeasibleTweakWindow: every cell violates 2 delta <= t_comp / rho\n";
    return kExitRuntime;
  }
  return kExitOk;
}

// --- simulate ----------------------------------------------------------------

struct SimulateOutputs {
  std::string report;  // empty: stdout
  std::string trace;   // empty: not written
};

inline int cmd_simulate(const sim::ScenarioConfig& cfg, const SimulateOutputs& o,
                        std::ostream& out) {
  const auto rep = sim::simulate(cfg);
  const auto report = rep.to_json().dump(2) + "\n";
  const auto trace_path = o.trace.empty() ? cfg.trace_path : o.trace;
  if (!trace_path.empty()) write_file(trace_path, rep.trace.to_jsonl());
  const auto report_path = o.report.empty() ? cfg.report_path : o.report;
  if (report_path.empty()) {
    out << report;
  } else {
    write_file(report_path, report);
  }
  return kExitOk;
}

// --- capsule -----------------------------------------------------------------

struct CapsuleEncodeOptions {
  std::string id;
  std::string blueprint_file;
  std::string status_file;
  std::vector<std::string> tweak_files;
  std::string direction;  // "north" | "south" | empty (inferred)
  bool joint = false;
  bool no_compress = false;
  std::string key_hex;
  std::string out;
};

struct CapsuleDecodeOptions {
  std::string input = "-";
  std::string key_hex;
  std::string out;  // receives the canonical blueprint text
};

inline Bytes parse_key(const std::string& hex) {
  if (hex.empty()) return {};
  auto k = from_hex(hex);
  if (!k || k->empty()) fail(ErrorCode::ConfigError, "--key must be a non-empty hex string");
  return *k;
}

inline std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) s.pop_back();
  return s;
}

inline int cmd_capsule_encode(const CapsuleEncodeOptions& o, std::ostream& out) {
  const auto key = parse_key(o.key_hex);
  const bool south = o.direction.empty() ? !o.tweak_files.empty() : o.direction == "south";
  if (!o.direction.empty() && o.direction != "north" && o.direction != "south") {
    fail(ErrorCode::ConfigError, "--direction must be north or south");
  }
  auto flags = o.joint ? codec::CapsuleFlags::joint_encoding(!key.empty())
                       : codec::CapsuleFlags::per_segment(!o.no_compress, !key.empty());
  std::optional<codec::StatusRecord> status;
  if (!o.status_file.empty()) {
    status = codec::StatusRecord::from_json(sim::read_text_file(o.status_file));
  }
  codec::Capsule cap;
  if (south) {
    if (!o.blueprint_file.empty()) fail(ErrorCode::ConfigError, "southwise capsules carry no blueprint");
    std::vector<std::string> tweaks;
    for (const auto& f : o.tweak_files) {
      tweaks.push_back(scheme::print_tweak(scheme::parse_tweak(sim::read_text_file(f))));
    }
    cap = codec::Capsule::southwise(tweaks, status, flags);
  } else {
    if (!o.tweak_files.empty()) fail(ErrorCode::ConfigError, "northwise capsules carry no tweaks");
    std::optional<std::string> text;
    if (!o.blueprint_file.empty()) {
      text = scheme::print_blueprint(scheme::parse_blueprint(sim::read_text_file(o.blueprint_file)));
    }
    cap = codec::Capsule::northwise(text ? std::optional<std::string_view>(*text) : std::nullopt,
                                    status, flags);
  }
  const auto wire = codec::encode_extended_id({codec::ResourceId(o.id), cap}, {}, key);
  if (o.out.empty()) {
    out << wire << '\n';
  } else {
    write_file(o.out, wire + "\n");
  }
  return kExitOk;
}

inline std::string flag_names(const codec::CapsuleFlags& f) {
  std::string s;
  auto add = [&](bool on, std::string_view n) {
    if (on) s += (s.empty() ? "" : ",") + std::string(n);
  };
  add(f.blueprint_compressed(), "blueprint-compressed");
  add(f.status_compressed(), "status-compressed");
  add(f.encrypted(), "encrypted");
  add(f.joint(), "joint-encoding");
  return s.empty() ? "none" : s;
}

inline int cmd_capsule_decode(const CapsuleDecodeOptions& o, std::istream& in, std::ostream& out) {
  std::string text;
  if (o.input == "-") {
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  } else {
    text = sim::read_text_file(o.input);
  }
  const auto xid = codec::decode_extended_id(trim(text), {}, parse_key(o.key_hex));
  out << "id: " << xid.id.str() << '\n';
  if (!xid.appendix) {
    out << "no capsule\n";
    return kExitOk;
  }
  const auto& c = *xid.appendix;
  out << "direction: " << codec::direction_name(c.header.direction) << '\n';
  out << "flags: " << flag_names(c.header.flags) << '\n';
  if (c.blueprint) {
    const auto canon = scheme::print_blueprint(scheme::parse_blueprint(to_string(c.blueprint->bytes)));
    out << "blueprint:\n" << canon;
    if (!o.out.empty()) write_file(o.out, canon);
  }
  if (const auto st = c.status_record()) out << "status: " << st->to_canonical_json() << '\n';
  for (const auto& t : c.tweaks) out << "tweak: " << to_string(t) << '\n';
  return kExitOk;
}

// --- tx-demo -----------------------------------------------------------------

struct TxDemoOptions {
  std::optional<int> claimant_layer;
  std::string trace;
};

inline std::string step_label(const sim::TraceEvent& e) {
  namespace k = sim::kind;
  if (e.kind == k::TxDeposit) return "deposit C's under k'";
  if (e.kind == k::RelayHop && e.phase == sim::Phase::Init) return "relay name (k' rides the appendix)";
  if (e.kind == k::RelayKeyReceived) return "k' received";
  if (e.kind == k::TxClaim) return "claim with k', layer, k''";
  if (e.kind == k::TxRelease) return "claim released (C_s, k)";
  if (e.kind == k::TxNotifySouth) return "notify south of k''";
  if (e.kind == k::BlueprintReceived) return "blueprint received at north";
  if (e.kind == k::PathwayEstablished) return "pathway established";
  if (e.kind == k::Nsvtp) return "nsvtp capsule delivered";
  if (e.kind == k::RelayHop) return "relay name";
  return e.kind;
}

inline void print_steps(const sim::Trace& trace, std::size_t from, std::ostream& out) {
  const auto& ev = trace.events();
  for (std::size_t i = from; i < ev.size(); ++i) {
    const auto& e = ev[i];
    char head[96];
    std::snprintf(head, sizeof head, "%3zu. [%s] ", i + 1, std::string(sim::phase_name(e.phase)).c_str());
    out << head << step_label(e) << ": " << e.from << " -> " << e.to << "  " << e.detail.dump()
        << '\n';
  }
}

// Counts exchange-addressed events after the first release.
inline std::size_t tx_messages_after_release(const sim::Trace& trace) {
  bool released = false;
  std::size_t n = 0;
  for (const auto& e : trace.events()) {
    if (released && e.to == sim::kTxAddress) ++n;
    if (e.kind == sim::kind::TxRelease) released = true;
  }
  return n;
}

inline int cmd_tx_demo(const sim::ScenarioConfig& cfg, const TxDemoOptions& o, std::ostream& out) {
  sim::validate_scenario(cfg);
  sim::Simulator s(sim::build_topology(cfg), sim::sim_config(cfg));
  const auto& topo = s.topology();
  const auto south_slot = topo.slot_named(cfg.south);
  const auto north_slot = topo.slot_named(cfg.north);
  const auto south = s.installed(south_slot).id;
  const auto north = s.installed(north_slot).id;
  const auto path = topo.path(south_slot, north_slot);
  if (path.size() < 3) fail(ErrorCode::ConfigError, "tx-demo needs at least one middle layer");

  out << "tx-demo mode=" << tx::mode_name(cfg.mode) << " south=" << south.str() << " (layer "
      << topo.slots()[south_slot].layer.str() << ") north=" << north.str() << " (layer "
      << topo.slots()[north_slot].layer.str() << ")\n";
  out << "initiation:\n";

  auto dump_trace = [&] {
    if (!o.trace.empty()) write_file(o.trace, s.trace().to_jsonl());
  };

  try {
    if (cfg.mode == tx::PathwayMode::Direct) {
      if (o.claimant_layer) fail(ErrorCode::ConfigError, "--claimant-layer needs via_tx mode");
      s.establish_direct(south, north);
    } else {
      std::optional<codec::ResourceId> claimant;
      if (o.claimant_layer && *o.claimant_layer != topo.slots()[north_slot].layer.value) {
        for (const auto slot : path) {
          if (topo.slots()[slot].layer.value == *o.claimant_layer) claimant = s.installed(slot).id;
        }
        if (!claimant) {
          fail(ErrorCode::ConfigError,
               "no component on layer " + std::to_string(*o.claimant_layer) + " along the path");
        }
        out << "impostor " << claimant->str() << " on layer " << *o.claimant_layer
            << " claims the deposit for layer " << topo.slots()[north_slot].layer.str() << "\n";
      }
      s.establish_via_tx(south, north, claimant);
    }
  } catch (const Error&) {
    print_steps(s.trace(), 0, out);
    dump_trace();
    throw;
  }
  print_steps(s.trace(), 0, out);
  const auto mark = s.trace().events().size();

  out << "post-initiation:\n";
  const auto& south_bp = s.installed(south_slot).blueprint;
  const auto* dvfs = south_bp ? south_bp->find_scheme("dvfs") : nullptr;
  const auto flags = codec::CapsuleFlags::per_segment(true, cfg.encrypt);
  std::vector<std::string> tweaks;
  if (dvfs && dvfs->find_param("freq_step") && dvfs->find_param("latency")) {
    const auto& fs = dvfs->find_param("freq_step")->feasible;
    const auto& lat = dvfs->find_param("latency")->feasible;
    const double f = fs.is_finite() ? fs.as_finite().values.front() : fs.as_interval().lo;
    const double l = lat.is_finite() ? lat.as_finite().values.front() : lat.as_interval().lo;
    tweaks.push_back(scheme::print_tweak({"dvfs", "set_freq", {{"freq_step", f}, {"latency", l}}}));
  }
  codec::StatusRecord hello;
  hello.set("round_trip", 1);
  const auto ping = tweaks.empty() ? std::optional(hello) : std::nullopt;
  s.send_nsvtp(north, south, codec::Capsule::southwise(tweaks, ping, flags));
  s.run();
  codec::StatusRecord st;
  const auto& state = s.component(south).state;
  st.set("frequency", state.count("frequency") ? state.at("frequency") : 0.0);
  const auto bp_text = s.installed(south_slot).blueprint_text();
  s.send_nsvtp(south, north, codec::Capsule::northwise(bp_text, st, flags));
  s.run();
  print_steps(s.trace(), mark, out);

  std::size_t tx_total = 0;
  for (const auto& e : s.trace().events()) tx_total += e.kind.rfind("tx.", 0) == 0;
  if (cfg.mode == tx::PathwayMode::Direct) {
    out << "tx events: " << tx_total << '\n';
  } else {
    out << "tx-addressed messages after release: " << tx_messages_after_release(s.trace()) << '\n';
  }
  std::size_t middle = 0;
  for (const auto slot : path) {
    if (slot != south_slot && slot != north_slot) middle += s.slot_decode_count(slot);
  }
  out << "middle-layer decodes: " << middle << '\n';
  dump_trace();
  return kExitOk;
}

// --- argument handling -------------------------------------------------------

// Full command line: flags > --config file > defaults.
inline int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
                   std::ostream& err) {
  CLI::App app{"nsvtp: capsule tooling, eta sweeps and stack simulation"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 1;
  std::string out_path;
  auto add_shared = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--out", out_path, "output path");
  };

  // sweep
  auto* sweep = app.add_subcommand("sweep", "eta over a log-spaced (rho, t_comp/delta) grid");
  add_shared(sweep);
  SweepOptions so;
  SweepOptions grid_flags;
  auto* o_rmin = sweep->add_option("--rho-min", grid_flags.rho_min);
  auto* o_rmax = sweep->add_option("--rho-max", grid_flags.rho_max);
  auto* o_rsteps = sweep->add_option("--rho-steps", grid_flags.rho_steps);
  auto* o_qmin = sweep->add_option("--ratio-min", grid_flags.ratio_min);
  auto* o_qmax = sweep->add_option("--ratio-max", grid_flags.ratio_max);
  auto* o_qsteps = sweep->add_option("--ratio-steps", grid_flags.ratio_steps);
  dvfs::ModelParams mp;
  auto* o_p0 = sweep->add_option("--p0", mp.p0);
  auto* o_p3 = sweep->add_option("--p3", mp.p3);
  auto* o_fmin = sweep->add_option("--fmin", mp.f_min);
  auto* o_fmax = sweep->add_option("--fmax", mp.f_max);
  auto* o_n = sweep->add_option("--n-dvfs", mp.n_dvfs);
  bool gen_exp = false;
  auto* o_gen = sweep->add_flag("--generalized-exponent", gen_exp, "use n_dvfs for the low-power term");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "run a scenario and report energy");
  add_shared(simulate);
  std::string trace_path;
  simulate->add_option("--trace", trace_path, "JSON-lines event trace output");
  std::string nsvtp_flag;
  auto* o_nsvtp = simulate->add_option("--nsvtp", nsvtp_flag)->check(CLI::IsMember({"on", "off"}));
  std::string mode_flag;
  auto* o_mode = simulate->add_option("--tx-mode", mode_flag)->check(CLI::IsMember({"via_tx", "direct"}));
  double delta = 0, rho = 0, t_comp = 0, hop_delay = 0;
  int cycles = 0;
  auto* o_delta = simulate->add_option("--delta", delta);
  auto* o_rho = simulate->add_option("--rho", rho);
  auto* o_tcomp = simulate->add_option("--t-comp", t_comp);
  auto* o_cycles = simulate->add_option("--cycles", cycles);
  auto* o_hop = simulate->add_option("--hop-delay", hop_delay);

  // capsule
  auto* capsule = app.add_subcommand("capsule", "encode or decode extended resource IDs");
  capsule->require_subcommand(1);
  auto* enc = capsule->add_subcommand("encode", "build an extended ID");
  CapsuleEncodeOptions eo;
  enc->add_option("--id", eo.id, "resource id")->required();
  enc->add_option("--blueprint", eo.blueprint_file)->check(CLI::ExistingFile);
  enc->add_option("--status", eo.status_file)->check(CLI::ExistingFile);
  enc->add_option("--tweak", eo.tweak_files)->check(CLI::ExistingFile);
  enc->add_option("--direction", eo.direction)->check(CLI::IsMember({"north", "south"}));
  enc->add_flag("--joint", eo.joint);
  enc->add_flag("--no-compress", eo.no_compress);
  enc->add_option("--key", eo.key_hex, "hex key; enables encryption");
  enc->add_option("--out", eo.out);
  auto* dec = capsule->add_subcommand("decode", "render an extended ID");
  CapsuleDecodeOptions dopt;
  dec->add_option("input", dopt.input, "file holding the extended ID, or - for stdin");
  dec->add_option("--key", dopt.key_hex);
  dec->add_option("--out", dopt.out, "write the canonical blueprint text here");

  // tx-demo
  auto* txd = app.add_subcommand("tx-demo", "walk through a pathway initiation");
  add_shared(txd);
  TxDemoOptions to;
  int claimant_layer = 0;
  auto* o_claim = txd->add_option("--claimant-layer", claimant_layer, "impostor claims from this layer");
  std::string demo_mode;
  auto* o_dmode = txd->add_option("--mode", demo_mode)->check(CLI::IsMember({"via_tx", "direct"}));
  txd->add_option("--trace", to.trace);

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "ConfigError: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (sweep->parsed()) {
      if (!config_path.empty()) apply_sweep_json(so, sim::read_json_file(config_path));
      if (!out_path.empty()) so.out = out_path;
      if (o_p0->count()) so.model.p0 = mp.p0;
      if (o_p3->count()) so.model.p3 = mp.p3;
      if (o_fmin->count()) so.model.f_min = mp.f_min;
      if (o_fmax->count()) so.model.f_max = mp.f_max;
      if (o_n->count()) so.model.n_dvfs = mp.n_dvfs;
      if (o_gen->count()) so.generalized_exponent = gen_exp;
      if (o_rmin->count()) so.rho_min = grid_flags.rho_min;
      if (o_rmax->count()) so.rho_max = grid_flags.rho_max;
      if (o_rsteps->count()) so.rho_steps = grid_flags.rho_steps;
      if (o_qmin->count()) so.ratio_min = grid_flags.ratio_min;
      if (o_qmax->count()) so.ratio_max = grid_flags.ratio_max;
      if (o_qsteps->count()) so.ratio_steps = grid_flags.ratio_steps;
      so.model.validate();
      return cmd_sweep(so, out, err);
    }
    if (simulate->parsed() || txd->parsed()) {
      auto cfg = config_path.empty() ? sim::default_scenario() : sim::load_scenario(config_path);
      if (simulate->parsed()) {
        if (simulate->get_option("--seed")->count()) cfg.seed = seed;
        if (o_nsvtp->count()) cfg.nsvtp = nsvtp_flag == "on";
        if (o_mode->count()) cfg.mode = sim::detail::parse_mode(mode_flag);
        if (o_delta->count()) cfg.delta = delta;
        if (o_rho->count()) cfg.rho = rho;
        if (o_tcomp->count()) cfg.t_comp = t_comp;
        if (o_cycles->count()) cfg.cycles = cycles;
        if (o_hop->count()) cfg.hop_delay = hop_delay;
        return cmd_simulate(cfg, {out_path, trace_path}, out);
      }
      if (txd->get_option("--seed")->count()) cfg.seed = seed;
      if (o_dmode->count()) cfg.mode = sim::detail::parse_mode(demo_mode);
      if (o_claim->count()) to.claimant_layer = claimant_layer;
      if (!out_path.empty() && to.trace.empty()) to.trace = out_path;
      return cmd_tx_demo(cfg, to, out);
    }
    if (enc->parsed()) {
      try {
        return cmd_capsule_encode(eo, out);
      } catch (const Error& e) {
        err << e.render() << '\n';
        return kExitConfig;
      }
    }
    if (dec->parsed()) {
      try {
        return cmd_capsule_decode(dopt, in, out);
      } catch (const Error& e) {
        err << e.render() << '\n';
        return kExitConfig;
      }
    }
  } catch (const Error& e) {
    err << e.render() << '\n';
    return exit_code_for(e);
  } catch (const CLI::ParseError& e) {
    err << "ConfigError: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "Error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace nsvtp::cli
