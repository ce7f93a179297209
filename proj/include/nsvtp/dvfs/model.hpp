#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "nsvtp/error.hpp"

namespace nsvtp::dvfs {

/**
 * Power-law constants of a DVFS-capable core.
 *
 * Units: watts for p0/p3, GHz for frequencies, MIPS for l_max.
 */
struct ModelParams {
  double p0 = 142.2;
  double p3 = 107.8;
  double f_min = 1.0;
  double f_max = 3.0;
  double n_dvfs = 3.0;
  double l_max = 3.0;

  // Reference configuration used throughout the experiments.
  static ModelParams reference() { return {}; }

  void validate() const {
    auto ok = [](double v) { return std::isfinite(v); };
    if (!ok(p0) || !ok(p3) || !ok(f_min) || !ok(f_max) || !ok(n_dvfs) || !ok(l_max)) {
      fail(ErrorCode::InvalidModelParams, "model parameters must be finite");
    }
    if (p0 < 0 || p3 < 0) fail(ErrorCode::InvalidModelParams, "P0 and P3 must be >= 0");
    if (p0 + p3 <= 0) fail(ErrorCode::InvalidModelParams, "P0 + P3 must be positive");
    if (!(f_min > 0) || f_min > f_max) {
      fail(ErrorCode::InvalidModelParams, "need 0 < f_min <= f_max");
    }
    if (!(n_dvfs > 0)) fail(ErrorCode::InvalidModelParams, "n_dvfs must be positive");
    if (!(l_max > 0)) fail(ErrorCode::InvalidModelParams, "l_max must be positive");
  }
};

/// Shape of one compute-commute cycle (seconds, ratio, seconds).
struct CyclePattern {
  double t_comp = 1.0;
  double rho = 1.0;    // compute time / data-exchange time
  double delta = 0.0;  // frequency transition latency

  void validate() const {
    if (!std::isfinite(t_comp) || !(t_comp > 0)) {
      fail(ErrorCode::InvalidCyclePattern, "t_comp must be positive");
    }
    if (!std::isfinite(rho) || !(rho > 0)) fail(ErrorCode::InvalidCyclePattern, "rho must be positive");
    if (!std::isfinite(delta) || delta < 0) {
      fail(ErrorCode::InvalidCyclePattern, "delta must be >= 0");
    }
  }

  double commute() const { return t_comp / rho; }
  double period() const { return t_comp + commute(); }
};

// Which exponent the low-frequency power term uses. Cubic reproduces the
// published closed form; ModelExponent substitutes n_dvfs.
enum class ExponentPolicy { Cubic, ModelExponent };

inline double exponent_for(const ModelParams& p, ExponentPolicy policy) {
  return policy == ExponentPolicy::Cubic ? 3.0 : p.n_dvfs;
}

// P = (P0 + P3 (f/f_max)^n) (l/l_max)
inline double core_power(const ModelParams& p, double f, double l) {
  p.validate();
  if (!(f >= p.f_min && f <= p.f_max)) {
    fail(ErrorCode::FrequencyOutOfRange, "frequency " + std::to_string(f) + " GHz outside [" +
                                             std::to_string(p.f_min) + ", " +
                                             std::to_string(p.f_max) + "]");
  }
  if (!(l >= 0 && l <= p.l_max)) {
    fail(ErrorCode::LoadOutOfRange, "load " + std::to_string(l) + " MIPS outside [0, " +
                                        std::to_string(p.l_max) + "]");
  }
  return (p.p0 + p.p3 * std::pow(f / p.f_max, p.n_dvfs)) * (l / p.l_max);
}

// Full-load power at f_min divided by full-load power at f_max.
inline double low_power_ratio(const ModelParams& p, ExponentPolicy policy = ExponentPolicy::Cubic) {
  p.validate();
  return (p.p0 + p.p3 * std::pow(p.f_min / p.f_max, exponent_for(p, policy))) / (p.p0 + p.p3);
}

// The commute window must fit both transitions: 2 delta <= t_comp / rho.
inline bool tweak_window_feasible(const CyclePattern& c) {
  return 2.0 * c.delta <= c.t_comp / c.rho;
}

inline void require_tweak_window(const CyclePattern& c) {
  c.validate();
  if (!tweak_window_feasible(c)) {
    fail(ErrorCode::InfeasibleTweakWindow,
         "commute window t_comp/rho = " + std::to_string(c.commute()) +
             " s is shorter than two transitions (2 delta = " + std::to_string(2 * c.delta) +
             " s)");
  }
}

// Energy of one cycle at full power throughout.
inline double baseline_cycle_energy(const ModelParams& p, const CyclePattern& c) {
  p.validate();
  c.validate();
  return (p.p0 + p.p3) * c.t_comp * (1.0 + 1.0 / c.rho);
}

// Energy of one cycle when the commute window runs at f_min, with both
// transitions billed at full power.
inline double nsvtp_cycle_energy(const ModelParams& p, const CyclePattern& c,
                                 ExponentPolicy policy = ExponentPolicy::Cubic) {
  p.validate();
  require_tweak_window(c);
  const double low = p.p0 + p.p3 * std::pow(p.f_min / p.f_max, exponent_for(p, policy));
  return (p.p0 + p.p3) * (c.t_comp + 2.0 * c.delta) + low * (c.t_comp / c.rho - 2.0 * c.delta);
}

// Ratio of the two energies above, in closed form.
inline double eta(const ModelParams& p, const CyclePattern& c,
                  ExponentPolicy policy = ExponentPolicy::Cubic) {
  require_tweak_window(c);
  const double r = low_power_ratio(p, policy);
  const double denom = 1.0 + 1.0 / c.rho;
  const double rel = c.delta / c.t_comp;
  return (1.0 + 2.0 * rel) / denom + r * (1.0 / c.rho - 2.0 * rel) / denom;
}

struct AllocationResult {
  std::int64_t cores = 1;
  double utilization = 0.0;
};

inline constexpr double kMaxUtilization = 0.8;

// Fewest cores keeping per-core utilization at or below 80%.
inline AllocationResult allocate_cores(double workload, double core_capacity) {
  if (!(workload > 0) || !std::isfinite(workload)) {
    fail(ErrorCode::InvalidModelParams, "workload must be positive");
  }
  if (!(core_capacity > 0) || !std::isfinite(core_capacity)) {
    fail(ErrorCode::InvalidModelParams, "core capacity must be positive");
  }
  auto util = [&](double n) { return workload / (n * core_capacity); };
  // The quotient can land an ulp above an integer (2.4 / 0.8), so step back
  // when one fewer core already satisfies the bound up to rounding.
  double n = std::max(1.0, std::ceil(workload / (kMaxUtilization * core_capacity)));
  if (n > 1 && util(n - 1) <= kMaxUtilization * (1 + 1e-12)) n -= 1;
  if (util(n) > kMaxUtilization * (1 + 1e-12)) n += 1;
  return {static_cast<std::int64_t>(n), util(n)};
}

}  // namespace nsvtp::dvfs
