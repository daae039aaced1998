#pragma once

// Minimizing movements: E_{k+1} = {u <= 0} where u solves the ROF problem
// with datum the signed distance to E_k.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "nlflow/distance.hpp"
#include "nlflow/error.hpp"
#include "nlflow/grid.hpp"
#include "nlflow/rof_solver.hpp"
#include "nlflow/shapes.hpp"

namespace nlflow {

struct FlowConfig {
  Energy energy;
  double h = 1.0;
  double t_max = 1.0;
  bool record_certificates = false;
  double tol = 1e-5;
  long max_iter = 50000;
  int guard = -1;              ///< cells kept clear of the halo; -1 = 3r or the cutoff
  double calibration = -1.0;   ///< distance calibration; -1 = dx/2
  bool tail_correction = false;  ///< fractional only: add h * (kernel tail) to the datum
  bool warm_start = true;
  bool subcell_datum = false;  ///< 2D: datum from the previous zero contour instead of the mask
  double zero_band = -1.0;     ///< |u| <= zero_band * dx counts as a tie at 0; -1 = 100 tol
};

/// Curvature contribution of the truncated kernel tail for a set contained
/// in the ball of radius L around the point: c_s |S^{N-1}| L^{-s} / s.
inline double frac_tail(const FracEnergyParams& p) {
  const double sphere = p.N == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi;
  return p.c_s * sphere * std::pow(p.cutoff, -p.s) / p.s;
}

inline int default_guard(const Energy& e, double dx) {
  if (auto* p = std::get_if<OscEnergyParams>(&e)) return static_cast<int>(std::ceil(3.0 * p->r / dx));
  if (auto* p = std::get_if<FracEnergyParams>(&e)) return p->reach;
  return static_cast<int>(std::ceil(3.0 * std::get<WeightedOscParams>(e).radii.back() / dx));
}

struct FlowStats {
  double t = 0.0;
  double area = 0.0;
  double perimeter = 0.0;
  double equiv_radius = 0.0;
  double min_u = 0.0;
  double max_u = 0.0;
  long solver_iters = 0;
  double residual = 0.0;
  double gap = 0.0;
};

struct FlowStep {
  int k = 0;
  SetMask E;
  ScalarField u;
  std::optional<Dual> dual;          ///< z_h^k, with record_certificates
  std::optional<ScalarField> datum;  ///< signed distance of E_{k-1}, with record_certificates
  FlowStats stats;
};

struct FlowTrajectory {
  double h = 1.0;
  std::vector<FlowStep> steps;
  double T_ext = std::numeric_limits<double>::infinity();
  double T_all = std::numeric_limits<double>::infinity();
  bool domain_limited = false;

  double T_star() const { return std::min(T_ext, T_all); }
  const SetMask& at(std::size_t k) const { return steps[std::min(k, steps.size() - 1)].E; }
};

inline double equivalent_radius(double area, int N) {
  return N == 2 ? std::sqrt(area / std::numbers::pi) : std::cbrt(3.0 * area / (4.0 * std::numbers::pi));
}

inline FlowStats set_stats(const SetMask& E, const ScalarField& u, const Energy& e, double t) {
  FlowStats s;
  s.t = t;
  const GridSpec& spec = E.spec();
  s.area = static_cast<double>(count(E)) * spec.cell_volume();
  s.equiv_radius = equivalent_radius(s.area, spec.ndims());
  s.perimeter = (empty(E) || full(E)) ? 0.0 : set_perimeter(E, e);
  const auto [lo, hi] = std::minmax_element(u.raw().begin(), u.raw().end());
  s.min_u = *lo;
  s.max_u = *hi;
  return s;
}

struct AtwResult {
  SetMask E;
  ScalarField u;
  ScalarField datum;
  std::optional<Dual> dual;
  long iterations = 0;
  double residual = 0.0;
  double gap = 0.0;
};

/// One scheme step. Empty and full sets are fixed points. With
/// cfg.subcell_datum, `contour` is a field whose sublevel {<= 0} is E and
/// whose interpolated zero contour places the boundary.
inline AtwResult atw_step(const SetMask& E, const FlowConfig& cfg, const Dual* warm = nullptr,
                          const ScalarField* contour = nullptr) {
  AtwResult out;
  const bool subcell = cfg.subcell_datum && contour != nullptr;
  const SignedDistanceField sd =
      subcell ? subcell_signed_distance(*contour) : signed_distance(E, cfg.calibration);
  if (subcell)
    require(sd.source.raw() == E.raw(), ErrorCode::mismatched_problems,
            "contour field does not match the set");
  out.datum = sd.d;
  if (sd.state != PhaseState::mixed) {
    out.E = E;
    out.u = sd.d;
    return out;
  }
  require(!touches_halo(E), ErrorCode::set_touches_boundary);
  RofProblem prob{cfg.energy, sd.d, cfg.h};
  if (cfg.tail_correction)
    if (auto* f = std::get_if<FracEnergyParams>(&cfg.energy))
      for (double& v : prob.g.raw()) v += cfg.h * frac_tail(*f);
  RofOptions opt;
  opt.tol = cfg.tol;
  opt.max_iter = cfg.max_iter;
  opt.warm_start = warm;
  RofSolution sol = solve_rof(prob, opt);
  // Plateaus at exactly 0 are common; snap solver noise so ties land in E.
  const double band = (cfg.zero_band < 0.0 ? 100.0 * cfg.tol : cfg.zero_band) * E.spec().dx();
  for (double& v : sol.u.raw())
    if (std::abs(v) <= band) v = 0.0;
  out.E = sublevel(sol.u, 0.0);
  require(!touches_halo(out.E), ErrorCode::domain_too_small,
          "evolved set reaches the halo band");
  out.u = std::move(sol.u);
  out.datum = prob.g;
  out.dual = std::move(sol.dual);
  out.iterations = sol.iterations;
  out.residual = sol.residual;
  out.gap = sol.gap;
  return out;
}

inline FlowTrajectory run_flow(const SetMask& E0, const FlowConfig& cfg) {
  require(cfg.h > 0.0, ErrorCode::invalid_argument, "h must be positive");
  require(cfg.t_max >= cfg.h, ErrorCode::invalid_argument, "t_max must be at least h");
  const GridSpec& spec = E0.spec();
  const int guard = cfg.guard >= 0 ? cfg.guard : default_guard(cfg.energy, spec.dx());
  const bool trivial0 = empty(E0) || full(E0);
  if (!trivial0) require(!touches_halo(E0), ErrorCode::set_touches_boundary);

  FlowTrajectory traj;
  traj.h = cfg.h;
  {
    FlowStep s0;
    s0.E = E0;
    s0.u = signed_distance(E0, cfg.calibration).d;
    s0.stats = set_stats(E0, s0.u, cfg.energy, 0.0);
    traj.steps.push_back(std::move(s0));
  }
  if (empty(E0)) traj.T_ext = 0.0;
  if (full(E0)) traj.T_all = 0.0;
  if (!trivial0 && !within_guard(E0, guard)) {
    traj.domain_limited = true;
    return traj;
  }

  const long K = static_cast<long>(std::floor(cfg.t_max / cfg.h + 1e-9));
  std::optional<Dual> last_dual;
  for (long k = 1; k <= K && !std::isfinite(traj.T_star()); ++k) {
    const SetMask& prev = traj.steps.back().E;
    const Dual* warm = cfg.warm_start && last_dual ? &*last_dual : nullptr;
    AtwResult r = atw_step(prev, cfg, warm, cfg.subcell_datum ? &traj.steps.back().u : nullptr);
    FlowStep st;
    st.k = static_cast<int>(k);
    st.stats = set_stats(r.E, r.u, cfg.energy, double(k) * cfg.h);
    st.stats.solver_iters = r.iterations;
    st.stats.residual = r.residual;
    st.stats.gap = r.gap;
    st.E = std::move(r.E);
    st.u = std::move(r.u);
    if (cfg.record_certificates) {
      st.dual = r.dual;
      st.datum = std::move(r.datum);
    }
    last_dual = std::move(r.dual);
    const bool is_empty = empty(st.E), is_full = full(st.E);
    if (is_empty) traj.T_ext = double(k) * cfg.h;
    if (is_full) traj.T_all = double(k) * cfg.h;
    const bool limited = !is_empty && !is_full && !within_guard(st.E, guard);
    traj.steps.push_back(std::move(st));
    if (limited) {
      traj.domain_limited = true;
      break;
    }
  }
  return traj;
}

struct LevelSetState {
  std::vector<double> levels;
  std::vector<FlowTrajectory> trajectories;
  std::vector<double> times;
  std::vector<ScalarField> w;  ///< w_h at each time; sentinel max level + 1
  bool domain_limited = false;
};

/// Per-level flows of the sublevel sets {u0 <= lambda}, assembled into
/// w_h(x, t) = min { lambda : x in E_lambda(t) }.
inline LevelSetState run_levelset(const ScalarField& u0, std::vector<double> levels,
                                  const FlowConfig& cfg) {
  require(!levels.empty(), ErrorCode::invalid_argument, "no levels");
  std::sort(levels.begin(), levels.end());
  LevelSetState st;
  st.levels = levels;
  for (double lam : levels) {
    st.trajectories.push_back(run_flow(sublevel(u0, lam), cfg));
    st.domain_limited = st.domain_limited || st.trajectories.back().domain_limited;
  }
  std::size_t K = std::numeric_limits<std::size_t>::max();
  for (const auto& tr : st.trajectories) {
    // Trajectories stopped by extinction are extended by their fixed point;
    // domain-limited ones cap the common horizon.
    const std::size_t last = tr.domain_limited
                                 ? tr.steps.size() - 1
                                 : static_cast<std::size_t>(std::floor(cfg.t_max / cfg.h + 1e-9));
    K = std::min(K, last);
  }
  const GridSpec& spec = u0.spec();
  const double sentinel = levels.back() + 1.0;
  for (std::size_t k = 0; k <= K; ++k) {
    st.times.push_back(double(k) * cfg.h);
    ScalarField w(spec, sentinel);
    for (std::size_t i = levels.size(); i-- > 0;) {
      const SetMask& E = st.trajectories[i].at(k);
      if (i + 1 < levels.size()) {
        const SetMask& F = st.trajectories[i + 1].at(k);
        std::size_t bad = 0;
        for (std::size_t c = 0; c < E.size(); ++c)
          if (E[c] && !F[c]) ++bad;
        if (bad > 0)
          throw Error(ErrorCode::nesting_violation,
                      std::to_string(bad) + " cells at t=" + std::to_string(st.times.back()));
      }
      for (std::size_t c = 0; c < E.size(); ++c)
        if (E[c]) w[c] = levels[i];
    }
    st.w.push_back(std::move(w));
  }
  return st;
}

struct AvoidanceReport {
  double min_separation = std::numeric_limits<double>::infinity();
  std::vector<double> separation;  ///< per step
  bool pass = true;
};

/// dist(E, F^c) between member centers, with F^c restricted to non-halo cells.
inline double set_separation(const SetMask& E, const SetMask& F) {
  const GridSpec& spec = E.spec();
  SetMask outside(spec, 0);
  for_each_cell(spec, [&](const Coord& c, std::size_t i) {
    outside[i] = (!F[i] && !spec.in_halo(c)) ? 1 : 0;
  });
  if (empty(outside) || empty(E)) return std::numeric_limits<double>::infinity();
  const ScalarField d = distance_to(outside);
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < E.size(); ++i)
    if (E[i]) m = std::min(m, d[i]);
  return m;
}

inline AvoidanceReport avoidance_check(const FlowTrajectory& trajE, const FlowTrajectory& trajF,
                                       double delta0) {
  require(trajE.h == trajF.h && trajE.steps.front().E.spec() == trajF.steps.front().E.spec(),
          ErrorCode::mismatched_problems);
  AvoidanceReport rep;
  const std::size_t n = std::max(trajE.steps.size(), trajF.steps.size());
  for (std::size_t k = 0; k < n; ++k) {
    const double s = set_separation(trajE.at(k), trajF.at(k));
    rep.separation.push_back(s);
    rep.min_separation = std::min(rep.min_separation, s);
  }
  const double dx = trajE.steps.front().E.spec().dx();
  rep.pass = rep.min_separation >= delta0 - dx;
  return rep;
}

struct SuperflowReport {
  double max_violation = -std::numeric_limits<double>::infinity();  ///< of h Div z - (d1 - d0)
  std::vector<double> step_violation;
  std::vector<double> step_sup_div;  ///< sup (Div z)^+ on {d_{k+1} >= lambda}
  double sup_div = 0.0;
  std::size_t cells_checked = 0;
  bool pass = true;
};

/// h Div z_{k+1} <= d_{k+1} - d_k + tol on free cells with d_{k+1} >= lambda.
/// d_k is the datum of the step and d_{k+1} = dist(., E_{k+1}) to member centers.
inline SuperflowReport superflow_inequality_check(const FlowTrajectory& traj, const Energy& energy,
                                                  double lambda, double tol) {
  SuperflowReport rep;
  for (std::size_t k = 1; k < traj.steps.size(); ++k) {
    const FlowStep& st = traj.steps[k];
    if (!st.dual || !st.datum) continue;
    if (empty(st.E)) continue;
    const GridSpec& spec = st.E.spec();
    const ScalarField div = divergence(*st.dual, energy);
    const ScalarField d1 = distance_to(st.E);
    double viol = -std::numeric_limits<double>::infinity(), sup = 0.0;
    for_each_cell(spec, [&](const Coord& c, std::size_t i) {
      if (spec.in_halo(c) || d1[i] < lambda) return;
      ++rep.cells_checked;
      viol = std::max(viol, traj.h * div[i] - (d1[i] - (*st.datum)[i]));
      sup = std::max(sup, std::max(0.0, div[i]));
    });
    rep.step_violation.push_back(viol);
    rep.step_sup_div.push_back(sup);
    rep.max_violation = std::max(rep.max_violation, viol);
    rep.sup_div = std::max(rep.sup_div, sup);
  }
  rep.pass = rep.max_violation <= tol;
  return rep;
}

struct BallBenchmark {
  std::vector<double> times;
  std::vector<double> radii;
  double fitted_rate = 0.0;  ///< a in R^2 = R0^2 - a t (least squares)
  double fitted_C = 0.0;     ///< C in R^{1+s} = R0^{1+s} - (1+s) C t (fractional only)
  double T_ext = std::numeric_limits<double>::infinity();
  bool domain_limited = false;
};

inline BallBenchmark ball_benchmark(const GridSpec& spec, double R0, const FlowConfig& cfg) {
  const FlowTrajectory traj = run_flow(disk_mask(spec, R0), cfg);
  BallBenchmark b;
  b.T_ext = traj.T_ext;
  b.domain_limited = traj.domain_limited;
  for (const FlowStep& st : traj.steps) {
    if (st.stats.area <= 0.0) break;
    b.times.push_back(st.stats.t);
    b.radii.push_back(st.stats.equiv_radius);
  }
  // Least squares through the initial value: y(t) = y0 - a t.
  auto fit = [&](auto transform) {
    double num = 0.0, den = 0.0;
    const double y0 = transform(b.radii.front());
    for (std::size_t i = 1; i < b.times.size(); ++i) {
      num += b.times[i] * (y0 - transform(b.radii[i]));
      den += b.times[i] * b.times[i];
    }
    return den > 0.0 ? num / den : 0.0;
  };
  if (b.times.size() >= 2) {
    b.fitted_rate = fit([](double r) { return r * r; });
    if (auto* f = std::get_if<FracEnergyParams>(&cfg.energy)) {
      const double s = f->s;
      b.fitted_C = fit([s](double r) { return std::pow(r, 1.0 + s); }) / (1.0 + s);
    }
  }
  return b;
}

struct BallProbe {
  double phi0 = 0.0;          ///< phi^h at the origin
  double phi0_bound = 0.0;    ///< 2 h^alpha
  double c0_measured = 0.0;   ///< max over |w| >= eta of (phi^h(w) - |w|) / h
  double sup_excess = 0.0;    ///< sup of phi^h(w) - max(|w| + c0 h, eta) over free cells
  long iterations = 0;
};

/// phi^h = ROF solution with g(w) = |w|, compared with the ball bounds.
inline BallProbe ball_probe(const GridSpec& spec, const Energy& e, double h, double c0, double eta,
                            double alpha, double tol = 1e-7, long max_iter = 200000) {
  ScalarField g(spec);
  for_each_cell(spec, [&](const Coord& c, std::size_t i) {
    const auto x = spec.position(c);
    g[i] = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
  });
  RofOptions opt;
  opt.tol = tol;
  opt.max_iter = max_iter;
  const RofSolution sol = solve_rof(RofProblem{e, g, h}, opt);
  BallProbe p;
  p.iterations = sol.iterations;
  p.phi0 = sol.u.at(spec.origin_cell());
  p.phi0_bound = 2.0 * std::pow(h, alpha);
  p.sup_excess = -std::numeric_limits<double>::infinity();
  for_each_cell(spec, [&](const Coord& c, std::size_t i) {
    if (spec.in_halo(c)) return;
    if (g[i] >= eta) p.c0_measured = std::max(p.c0_measured, (sol.u[i] - g[i]) / h);
    p.sup_excess = std::max(p.sup_excess, sol.u[i] - std::max(g[i] + c0 * h, eta));
  });
  return p;
}

}  // namespace nlflow
