#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nsvtp/dvfs/model.hpp"
#include "nsvtp/error.hpp"

namespace nsvtp::dvfs {

// `steps` points from lo to hi, evenly spaced in log space; both ends exact.
inline std::vector<double> log_space(double lo, double hi, int steps) {
  if (!(lo > 0) || !(hi >= lo) || steps < 1 || !std::isfinite(hi)) {
    fail(ErrorCode::ConfigError, "log_space needs 0 < lo <= hi and steps >= 1");
  }
  std::vector<double> out(static_cast<std::size_t>(steps));
  if (steps == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (int i = 0; i < steps; ++i) out[i] = std::exp(a + (b - a) * i / (steps - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

struct SweepCell {
  double rho = 0.0;
  double tcomp_over_delta = 0.0;
  bool feasible = false;
  double eta = std::numeric_limits<double>::quiet_NaN();  // NaN when infeasible
};

struct SweepGrid {
  std::vector<double> rho;
  std::vector<double> ratio;  // t_comp / delta
  std::vector<SweepCell> cells;  // row-major: cells[i * ratio.size() + j]

  const SweepCell& at(std::size_t i, std::size_t j) const { return cells[i * ratio.size() + j]; }

  std::size_t feasible_count() const {
    std::size_t n = 0;
    for (const auto& c : cells) n += c.feasible;
    return n;
  }

  std::optional<SweepCell> min_cell() const { return extreme(true); }
  std::optional<SweepCell> max_cell() const { return extreme(false); }

 private:
  std::optional<SweepCell> extreme(bool want_min) const {
    std::optional<SweepCell> best;
    for (const auto& c : cells) {
      if (!c.feasible) continue;
      if (!best || (want_min ? c.eta < best->eta : c.eta > best->eta)) best = c;
    }
    return best;
  }
};

// eta over the (rho, t_comp/delta) plane. eta depends on delta only through
// delta/t_comp, so each cell uses t_comp = 1. Infeasible cells are flagged,
// never thrown.
inline SweepGrid sweep_eta(const ModelParams& p, const std::vector<double>& rho_grid,
                           const std::vector<double>& ratio_grid,
                           ExponentPolicy policy = ExponentPolicy::Cubic) {
  p.validate();
  if (rho_grid.empty() || ratio_grid.empty()) fail(ErrorCode::ConfigError, "sweep grid is empty");
  for (double r : rho_grid) {
    if (!(r > 0) || !std::isfinite(r)) fail(ErrorCode::ConfigError, "rho values must be positive");
  }
  for (double q : ratio_grid) {
    if (!(q > 0) || !std::isfinite(q)) {
      fail(ErrorCode::ConfigError, "t_comp/delta values must be positive");
    }
  }
  SweepGrid g{rho_grid, ratio_grid, {}};
  g.cells.reserve(rho_grid.size() * ratio_grid.size());
  for (double rho : rho_grid) {
    for (double ratio : ratio_grid) {
      SweepCell cell{rho, ratio};
      const CyclePattern c{1.0, rho, 1.0 / ratio};
      cell.feasible = tweak_window_feasible(c);
      if (cell.feasible) cell.eta = eta(p, c, policy);
      g.cells.push_back(cell);
    }
  }
  return g;
}

inline std::string format_g12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// Header `rho,tcomp_over_delta,eta,feasible`; eta left empty when infeasible.
inline void write_sweep_csv(std::ostream& os, const SweepGrid& g) {
  os << "rho,tcomp_over_delta,eta,feasible\n";
  for (const auto& c : g.cells) {
    os << format_g12(c.rho) << ',' << format_g12(c.tcomp_over_delta) << ','
       << (c.feasible ? format_g12(c.eta) : std::string()) << ',' << (c.feasible ? 1 : 0) << '\n';
  }
}

}  // namespace nsvtp::dvfs
