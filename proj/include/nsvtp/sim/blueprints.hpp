#pragma once

#include <string>
#include <vector>

#include "nsvtp/dvfs/model.hpp"
#include "nsvtp/scheme/blueprint.hpp"
#include "nsvtp/scheme/lexer.hpp"
#include "nsvtp/sim/topology.hpp"

namespace nsvtp::sim {

// Frequency steps a high-grade core offers: f_min, f_max and the midpoint.
inline std::vector<double> default_freq_steps(const dvfs::ModelParams& p) {
  if (p.f_min == p.f_max) return {p.f_min};
  return {p.f_min, (p.f_min + p.f_max) / 2.0, p.f_max};
}

// Blueprint of a core. Low grade runs pinned at f_max and exposes power and
// status; high grade widens the frequency range and adds a `dvfs` scheme
// whose set_freq formula the north can populate.
inline std::string cpu_blueprint_text(const dvfs::ModelParams& p, double delta, Grade grade) {
  using scheme::format_number;
  const bool high = grade == Grade::High;
  const auto f_lo = format_number(high ? p.f_min : p.f_max);
  const auto f_hi = format_number(p.f_max);
  const auto consts = "    const P0 = " + format_number(p.p0) + " W;\n" +
                      "    const P3 = " + format_number(p.p3) + " W;\n" +
                      "    const f_max = " + f_hi + " GHz;\n" +
                      "    const n_dvfs = " + format_number(p.n_dvfs) + ";\n";
  std::string out = "blueprint \"cpu-core/" + std::string(grade_name(grade)) + "\" rev 1 {\n";
  out += "  scheme power {\n";
  out += "    param f : [" + f_lo + ", " + f_hi + "] GHz;\n";
  out += "    param l : [0, " + format_number(p.l_max) + "] MIPS;\n";
  out += consts;
  out += "    const l_max = " + format_number(p.l_max) + " MIPS;\n";
  out += "    outcome power;\n";
  out += "    formula draw : (P0 + P3 * (f / f_max) ^ n_dvfs) * (l / l_max) -> power;\n";
  out += "  }\n";
  out += "  scheme status {\n";
  out += "    param frequency : [" + f_lo + ", " + f_hi + "] GHz;\n";
  out += "    param power : [0, " + format_number(p.p0 + p.p3) + "] W;\n";
  out += "  }\n";
  if (high) {
    std::string steps;
    for (double f : default_freq_steps(p)) steps += (steps.empty() ? "" : ", ") + format_number(f);
    out += "  scheme dvfs {\n";
    out += "    param freq_step : {" + steps + "} GHz;\n";
    out += "    param latency : {" + format_number(delta) + "} s;\n";
    out += consts;
    out += "    outcome power;\n";
    out += "    formula set_freq : P0 + P3 * (freq_step / f_max) ^ n_dvfs -> power;\n";
    out += "  }\n";
  }
  out += "}\n";
  return out;
}

inline scheme::Blueprint cpu_blueprint(const dvfs::ModelParams& p, double delta, Grade grade) {
  return scheme::parse_blueprint(cpu_blueprint_text(p, delta, grade));
}

}  // namespace nsvtp::sim
