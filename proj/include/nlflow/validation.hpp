#pragma once

// Acceptance checks. Each criterion builds its own seeded instances, runs the
// solvers and oracles, and reports the worst observed quantity against its
// threshold. `quick` shrinks instance counts and grids for smoke runs.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "nlflow/config.hpp"
#include "nlflow/curvature.hpp"
#include "nlflow/distance.hpp"
#include "nlflow/flow.hpp"
#include "nlflow/io.hpp"
#include "nlflow/oracle.hpp"
#include "nlflow/rng.hpp"
#include "nlflow/rof_solver.hpp"
#include "nlflow/shapes.hpp"

namespace nlflow::validation {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct SuiteOptions {
  bool quick = false;
  std::uint64_t seed = 1;
};

namespace detail {

inline std::string format(const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  return buf;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Runs body(result); library errors become a failed result with the message.
inline CriterionResult run_timed(int id, const char* name,
                                 const std::function<void(CriterionResult&)>& body) {
  CriterionResult res;
  res.id = id;
  res.name = name;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(res);
  } catch (const std::exception& e) {
    res.pass = false;
    res.detail = std::string("error: ") + e.what();
  }
  res.seconds = seconds_since(t0);
  return res;
}

inline std::uint64_t mix(std::uint64_t seed, std::uint64_t k) {
  SplitMix64 r(seed * 0x9E3779B97F4A7C15ull + k);
  return r.next();
}

inline double dual_pairing(const ScalarField& u, const Dual& z, const Energy& e) {
  if (auto* p = std::get_if<OscEnergyParams>(&e)) return osc_pairing(u, std::get<OscDual>(z), *p);
  if (auto* p = std::get_if<FracEnergyParams>(&e)) return frac_pairing(u, std::get<FracDual>(z), *p);
  const auto& wp = std::get<WeightedOscParams>(e);
  const auto& wz = std::get<WeightedOscDual>(z);
  double s = 0.0;
  for (std::size_t k = 0; k < wp.radii.size(); ++k)
    s += wp.weights[k] * osc_pairing(u, wz.parts[k], wp.parts[k]);
  return s;
}

inline bool dual_feasible(const Dual& z, double tol) {
  if (auto* d = std::get_if<OscDual>(&z)) return osc_dual_feasible(*d, tol);
  if (auto* d = std::get_if<FracDual>(&z)) return frac_dual_feasible(*d, tol);
  for (const OscDual& d : std::get<WeightedOscDual>(z).parts)
    if (!osc_dual_feasible(d, tol)) return false;
  return true;
}

/// Feasible-set projection of a dual (per window for osc, clamp for frac).
inline void project_dual(Dual& z) {
  if (auto* d = std::get_if<OscDual>(&z)) return project_osc_dual(*d);
  if (auto* d = std::get_if<FracDual>(&z)) {
    for (double& v : d->z) v = std::clamp(v, -1.0, 1.0);
    return;
  }
  for (OscDual& d : std::get<WeightedOscDual>(z).parts) project_osc_dual(d);
}

inline ScalarField uniform_field(const GridSpec& spec, SplitMix64& rng, double lo, double hi) {
  ScalarField f(spec);
  for (double& v : f.raw()) v = rng.uniform(lo, hi);
  return f;
}

/// Halo cells set to `value`, free cells untouched.
inline void set_halo(ScalarField& f, double value) {
  const GridSpec& spec = f.spec();
  for_each_cell(spec, [&](const Coord& c, std::size_t i) {
    if (spec.in_halo(c)) f[i] = value;
  });
}

inline std::size_t violating_cells(const SetMask& inner, const SetMask& outer) {
  std::size_t bad = 0;
  for (std::size_t i = 0; i < inner.size(); ++i)
    if (inner[i] && !outer[i]) ++bad;
  return bad;
}

}  // namespace detail

/// Smooth random field with discrete Lipschitz constant exactly `lip` over
/// cell pairs within two cells: a sum of twelve random plane waves, rescaled.
inline ScalarField random_lipschitz_field(const GridSpec& spec, std::uint64_t seed, double lip = 1.0) {
  SplitMix64 rng(seed);
  struct Mode {
    double kx, ky, kz, phase, amp;
  };
  std::vector<Mode> modes;
  for (int k = 0; k < 12; ++k)
    modes.push_back({rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                     spec.ndims() == 3 ? rng.uniform(-0.5, 0.5) : 0.0, rng.uniform(0.0, 6.28318),
                     rng.normal()});
  ScalarField f(spec);
  for_each_cell(spec, [&](const Coord& c, std::size_t i) {
    double v = 0.0;
    for (const Mode& m : modes) v += m.amp * std::sin(m.kx * c[0] + m.ky * c[1] + m.kz * c[2] + m.phase);
    f[i] = v;
  });
  const double L = lipschitz_check(f, f, 2).lip_g;
  require(L > 0.0, ErrorCode::invalid_argument, "degenerate random field");
  for (double& v : f.raw()) v *= lip / L;
  return f;
}

// 1. Optimality certificates of solve_rof on Lipschitz data.
inline CriterionResult check_certificates(const SuiteOptions& o = {}) {
  return detail::run_timed(1, "optimality certificates", [&](CriterionResult& res) {
    const int n = o.quick ? 32 : 64, runs = o.quick ? 2 : 10;
    const GridSpec spec({n, n}, 1.0, 8);
    const std::vector<Energy> energies{make_osc_params(spec, 2.0), make_frac_params(spec, 0.5, 8.0)};
    double worst_res = 0.0, worst_gap = 0.0, worst_time = 0.0;
    bool ok = true;
    for (std::size_t ei = 0; ei < energies.size(); ++ei)
      for (int k = 0; k < runs; ++k) {
        const ScalarField g = random_lipschitz_field(spec, detail::mix(o.seed, 100 * ei + k));
        const RofProblem p{energies[ei], g, 1.0};
        RofOptions opt;
        opt.tol = 5e-4;
        opt.max_iter = 200000;
        const auto t0 = std::chrono::steady_clock::now();
        const RofSolution sol = solve_rof(p, opt);
        const double secs = detail::seconds_since(t0);
        double gnorm = 0.0;
        for (double v : g.raw()) gnorm = std::max(gnorm, std::abs(v));
        // Recomputed from the returned pair, not taken from the solver.
        const double resid = rof_residual(p, sol.u, sol.dual) / (1.0 + gnorm);
        const double gap = (energy_value(sol.u, p.energy) - detail::dual_pairing(sol.u, sol.dual, p.energy)) /
                           std::max(1.0, std::abs(rof_objective(p, sol.u)));
        Dual projected = sol.dual;
        detail::project_dual(projected);
        const bool feasible = detail::dual_feasible(sol.dual, 1e-12) && detail::dual_feasible(projected, 1e-12);
        worst_res = std::max(worst_res, resid);
        worst_gap = std::max(worst_gap, gap);
        worst_time = std::max(worst_time, secs);
        ok = ok && resid <= 1e-3 && gap <= 1e-3 && feasible && secs <= 60.0;
      }
    res.pass = ok;
    res.detail = detail::format("%d runs on %d^2: residual/(1+|g|) %.2e, gap %.2e, slowest %.1f s",
                                2 * runs, n, worst_res, worst_gap, worst_time);
  });
}

// 2. Thresholds of the ROF solution against exhaustive geometric minimization.
inline CriterionResult check_oracle_equivalence(const SuiteOptions& o = {}) {
  return detail::run_timed(2, "oracle equivalence", [&](CriterionResult& res) {
    const int runs = o.quick ? 2 : 20;
    const GridSpec spec({8, 8}, 1.0, 2);
    const std::vector<Energy> energies{make_osc_params(spec, 1.5), make_frac_params(spec, 0.5, 2.0)};
    const double h = 1.0, halo_value = 3.0, plateau = 1e-6;
    double worst = 0.0;
    std::size_t levels_checked = 0, mismatches = 0;
    for (std::size_t ei = 0; ei < energies.size(); ++ei)
      for (int k = 0; k < runs; ++k) {
        SplitMix64 rng(detail::mix(o.seed, 200 + 100 * ei + k));
        ScalarField g = detail::uniform_field(spec, rng, -2.0, 2.0);
        detail::set_halo(g, halo_value);
        RofOptions opt;
        opt.tol = 1e-13;
        opt.max_iter = 2000000;
        RofSolution sol;
        try {
          sol = solve_rof(RofProblem{energies[ei], g, h}, opt);
        } catch (const NotConverged& nc) {
          sol = nc.best();  // judged by the thresholds below
        }
        // Plateau values of u on free cells, merged within `plateau`.
        std::vector<double> vals;
        for_each_cell(spec, [&](const Coord& c, std::size_t i) {
          if (!spec.in_halo(c)) vals.push_back(sol.u[i]);
        });
        std::sort(vals.begin(), vals.end());
        std::vector<double> levels;
        for (double v : vals)
          if (levels.empty() || v - levels.back() > plateau) levels.push_back(v);
        std::vector<double> ts = levels;
        for (std::size_t j = 0; j + 1 < levels.size(); ++j) ts.push_back(0.5 * (levels[j] + levels[j + 1]));
        ts.push_back(levels.front() - 0.5);
        ts.push_back(std::min(levels.back() + 0.5, 0.5 * (levels.back() + halo_value)));
        for (double t : ts) {
          const auto en = oracle::enumerate_geometric(g, h, energies[ei], t);
          SetMask A(spec, 0), E(spec, 0);
          for_each_cell(spec, [&](const Coord& c, std::size_t i) {
            if (spec.in_halo(c)) return;
            A[i] = sol.u[i] < t - plateau ? 1 : 0;
            E[i] = sol.u[i] <= t + plateau ? 1 : 0;
          });
          const double ea = oracle::geometric_energy(A, g, h, energies[ei], t) - en.min_value;
          const double ee = oracle::geometric_energy(E, g, h, energies[ei], t) - en.min_value;
          worst = std::max({worst, ea, ee});
          if (!(A == en.minimal) || !(E == en.maximal)) ++mismatches;
          ++levels_checked;
        }
      }
    res.pass = worst <= 1e-6 && mismatches == 0;
    res.detail = detail::format("%zu levels over %d data: excess over minimum %.2e, A_t/E_t mismatches %zu",
                                levels_checked, 2 * runs, worst, mismatches);
  });
}

// 3. Coarea formula on quantized fields.
inline CriterionResult check_coarea(const SuiteOptions& o = {}) {
  return detail::run_timed(3, "coarea", [&](CriterionResult& res) {
    const int runs = o.quick ? 5 : 50;
    const GridSpec spec({24, 24}, 1.0, 3);
    const std::vector<Energy> energies{make_osc_params(spec, 2.0), make_frac_params(spec, 0.5, 3.0)};
    double worst = 0.0;
    for (std::size_t ei = 0; ei < energies.size(); ++ei)
      for (int k = 0; k < runs; ++k) {
        SplitMix64 rng(detail::mix(o.seed, 300 + 100 * ei + k));
        const int m = 2 + static_cast<int>(rng.below(7));
        std::vector<double> levels;
        for (int j = 0; j < m; ++j) levels.push_back(rng.uniform(-1.0, 1.0));
        std::sort(levels.begin(), levels.end());
        // Smooth field quantized to the levels; the halo sits at the top level.
        const ScalarField smooth = random_lipschitz_field(spec, rng.next(), 0.3);
        ScalarField u(spec);
        for_each_cell(spec, [&](const Coord& c, std::size_t i) {
          if (spec.in_halo(c)) {
            u[i] = levels.back();
            return;
          }
          const double x = std::clamp(0.5 * (smooth[i] + 1.0 + 0.3 * rng.uniform(-1.0, 1.0)), 0.0, 0.999999);
          u[i] = levels[static_cast<std::size_t>(x * m)];
        });
        const double J = energy_value(u, energies[ei]);
        double sum = 0.0;
        for (int j = 0; j + 1 < m; ++j) {
          const SetMask E = sublevel(u, levels[j]);
          if (empty(E)) continue;
          sum += (levels[j + 1] - levels[j]) * set_perimeter(E, energies[ei]);
        }
        const double rel = std::abs(J - sum) / std::max(std::abs(J), 1e-300);
        worst = std::max(worst, J == 0.0 && sum == 0.0 ? 0.0 : rel);
      }
    res.pass = worst <= 1e-12;
    res.detail = detail::format("%d fields per energy: worst relative deviation %.2e", runs, worst);
  });
}

// 4. Comparison for ordered data and inclusion along nested flows.
inline CriterionResult check_comparison(const SuiteOptions& o = {}) {
  return detail::run_timed(4, "comparison", [&](CriterionResult& res) {
    const int pairs = o.quick ? 4 : 50, flows = o.quick ? 2 : 25;
    double worst_excess = -std::numeric_limits<double>::infinity();
    {
      const GridSpec spec({16, 16}, 1.0, 3);
      const std::vector<Energy> energies{make_osc_params(spec, 2.0), make_frac_params(spec, 0.5, 3.0)};
      for (std::size_t ei = 0; ei < energies.size(); ++ei)
        for (int k = 0; k < pairs; ++k) {
          SplitMix64 rng(detail::mix(o.seed, 400 + 100 * ei + k));
          const ScalarField g1 = detail::uniform_field(spec, rng, -1.0, 1.0);
          ScalarField g2 = g1;
          for (double& v : g2.raw()) v += rng.uniform(0.0, 0.5);
          const double h = rng.uniform(0.5, 4.0);
          const RofProblem p1{energies[ei], g1, h}, p2{energies[ei], g2, h};
          RofOptions opt;
          opt.tol = 1e-6;
          opt.max_iter = 200000;
          const RofSolution s1 = solve_rof(p1, opt), s2 = solve_rof(p2, opt);
          comparison_check(p1, p2, s1, s2, 1e-3);  // validates the pair
          for (std::size_t i = 0; i < s1.u.size(); ++i) worst_excess = std::max(worst_excess, s1.u[i] - s2.u[i]);
        }
    }
    std::size_t violations = 0, steps_checked = 0, limited = 0;
    {
      const GridSpec spec({56, 56}, 1.0, 4);
      const std::vector<Energy> energies{make_osc_params(spec, 2.0), make_frac_params(spec, 0.5, 4.0)};
      const std::vector<double> hs{2.0, 1.0};
      for (std::size_t ei = 0; ei < energies.size(); ++ei)
        for (int k = 0; k < flows; ++k) {
          const std::uint64_t s = detail::mix(o.seed, 500 + 100 * ei + k);
          const SetMask F0 = shape_mask(spec, parse_shape("blob:R=12,seed=" + std::to_string(s % 1000000)));
          SetMask E0 = F0;
          const SetMask G = shape_mask(spec, parse_shape("blob:R=12,seed=" + std::to_string(s % 1000000 + 1)));
          for (std::size_t i = 0; i < E0.size(); ++i) E0[i] = F0[i] && G[i];
          if (empty(E0)) E0 = sublevel(signed_distance(F0).d, -2.0);
          FlowConfig cfg{energies[ei]};
          cfg.h = hs[ei];
          cfg.t_max = 10.0 * cfg.h;
          cfg.tol = 1e-7;
          cfg.max_iter = 200000;
          const FlowTrajectory tE = run_flow(E0, cfg), tF = run_flow(F0, cfg);
          if (tE.domain_limited || tF.domain_limited) ++limited;
          for (std::size_t j = 0; j <= 10; ++j) {
            violations += detail::violating_cells(tE.at(j), tF.at(j));
            ++steps_checked;
          }
        }
    }
    res.pass = worst_excess <= 2e-3 && violations == 0 && limited == 0;
    res.detail = detail::format(
        "%d data pairs: max(u1-u2) %.2e; %d nested flows, %zu steps: %zu violating cells, %zu domain-limited",
        2 * pairs, worst_excess, 2 * flows, steps_checked, violations, limited);
  });
}

// 5. Lipschitz bound of the solution for Lipschitz-1 data.
inline CriterionResult check_lipschitz(const SuiteOptions& o = {}) {
  return detail::run_timed(5, "lipschitz preservation", [&](CriterionResult& res) {
    const int runs = o.quick ? 2 : 20;
    const GridSpec spec({48, 48}, 1.0, 8);
    const std::vector<Energy> energies{make_osc_params(spec, 2.0), make_frac_params(spec, 0.5, 8.0)};
    double worst = 0.0;
    for (std::size_t ei = 0; ei < energies.size(); ++ei)
      for (int k = 0; k < runs; ++k) {
        const ScalarField g = random_lipschitz_field(spec, detail::mix(o.seed, 600 + 100 * ei + k));
        RofOptions opt;
        opt.tol = 1e-8;
        opt.max_iter = 500000;
        const RofSolution sol = solve_rof(RofProblem{energies[ei], g, 2.0}, opt);
        worst = std::max(worst, lipschitz_check(g, sol.u, 2, true).lip_u);
      }
    res.pass = worst <= 1.0 + 5e-3;
    res.detail = detail::format("%d data per energy: max Lip(u) %.5f", runs, worst);
  });
}

// 6. Shrinking disk under the Minkowski flow against R^2 = R0^2 - 2t.
inline CriterionResult check_minkowski_ball(const SuiteOptions& o = {}) {
  return detail::run_timed(6, "minkowski ball law", [&](CriterionResult& res) {
    const double R0 = o.quick ? 12.0 : 20.0, r = o.quick ? 2.0 : 4.0;
    const int n = o.quick ? 48 : 80;
    const GridSpec spec({n, n}, 1.0, static_cast<int>(r) + 1);
    // c0 is the largest speed on the tracked range, the curvature at R = 2r.
    const double c0 =
        minkowski_curvature(SmoothSetProbe::ball(2, 2.0 * r), {2.0 * r, 0.0, 0.0}, r).value;
    FlowConfig cfg{make_osc_params(spec, r)};
    cfg.h = spec.dx() / c0;
    cfg.t_max = 0.5 * R0 * R0 + 4.0 * cfg.h;
    cfg.tol = 1e-5;
    cfg.subcell_datum = true;
    const auto t0 = std::chrono::steady_clock::now();
    const FlowTrajectory tr = run_flow(disk_mask(spec, R0), cfg);
    const double secs = detail::seconds_since(t0);
    double worst = 0.0, worst_t = 0.0;
    for (const FlowStep& st : tr.steps) {
      const double R2 = R0 * R0 - 2.0 * st.stats.t;
      if (R2 < 4.0 * r * r) break;
      const double err = std::abs(st.stats.equiv_radius - std::sqrt(R2)) / std::sqrt(R2);
      if (err > worst) {
        worst = err;
        worst_t = st.stats.t;
      }
    }
    res.pass = !tr.domain_limited && worst <= 0.10 && secs <= 600.0;
    res.detail = detail::format("R0=%g r=%g h=%g: worst relative radius error %.3f at t=%g, T_ext %g (law %g), %.0f s",
                                R0, r, cfg.h, worst, worst_t, tr.T_ext, 0.5 * R0 * R0, secs);
  });
}

// 7. Fractional curvature of disks and the fractional ball law.
inline CriterionResult check_fractional_ball(const SuiteOptions& o = {}) {
  return detail::run_timed(7, "fractional ball law", [&](CriterionResult& res) {
    const double s = 0.5;
    const double C = ball_constant(2, s);
    // (i) slope of the boundary-averaged lattice curvature.
    const std::vector<double> radii = o.quick ? std::vector<double>{8, 12} : std::vector<double>{8, 12, 16, 24};
    const int cut = o.quick ? 32 : 64;
    const GridSpec cspec({2 * cut + 72, 2 * cut + 72}, 1.0, cut);
    const FracEnergyParams cp = make_frac_params(cspec, s, cut);
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (double R : radii) {
      const double kappa = frac_curvature_boundary_mean(disk_mask(cspec, R), cp).total();
      const double x = std::log(R), y = std::log(kappa);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double m = double(radii.size());
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    // (ii) extinction time of a disk against the ODE dR/dt = -C R^{-s}.
    const double R0 = o.quick ? 8.0 : 16.0, L = o.quick ? 12.0 : 24.0;
    const int halo = static_cast<int>(L);
    const int n = 2 * halo + 2 * static_cast<int>(R0) + 8;
    const GridSpec fspec({n, n}, 1.0, halo);
    FlowConfig cfg{make_frac_params(fspec, s, L)};
    cfg.h = 0.5;
    cfg.t_max = 4.0 * std::pow(R0, 1.0 + s) / ((1.0 + s) * C);
    cfg.tol = 1e-5;
    cfg.guard = 2;
    cfg.tail_correction = true;
    cfg.subcell_datum = true;
    const FlowTrajectory tr = run_flow(disk_mask(fspec, R0), cfg);
    const double predicted = std::pow(R0, 1.0 + s) / ((1.0 + s) * C);
    const double rel = std::abs(tr.T_ext - predicted) / predicted;
    res.pass = std::abs(slope + s) <= 0.1 && std::isfinite(tr.T_ext) && rel <= 0.2;
    res.detail = detail::format("curvature slope %.3f (target %.2f); extinction %g vs ODE %.2f (%.1f%%)",
                                slope, -s, tr.T_ext, predicted, 100.0 * rel);
  });
}

// 8. Upper bounds for the ROF solution with conical data.
inline CriterionResult check_ball_probe(const SuiteOptions& o = {}) {
  return detail::run_timed(8, "ball probe bounds", [&](CriterionResult& res) {
    const int n = o.quick ? 40 : 88;
    const GridSpec spec({n, n}, 1.0, 3);
    const Energy e = make_osc_params(spec, 2.0);
    const double eta = 5.0, alpha = 0.25;
    const std::vector<double> hs{0.5, 0.25, 0.125};
    bool ok = true;
    double c0 = 0.0, worst_phi0 = 0.0;
    for (double h : hs) {
      const BallProbe p = ball_probe(spec, e, h, 0.0, eta, alpha);
      ok = ok && p.phi0 <= p.phi0_bound;
      worst_phi0 = std::max(worst_phi0, p.phi0 / p.phi0_bound);
      c0 = std::max(c0, p.c0_measured);
    }
    // h0 from eta - c0 h0 = 3 eta / 4.
    const double h0 = c0 > 0.0 ? eta / (4.0 * c0) : std::numeric_limits<double>::infinity();
    double excess = -std::numeric_limits<double>::infinity();
    int tested = 0;
    for (double h : hs) {
      if (h > h0) continue;
      excess = std::max(excess, ball_probe(spec, e, h, c0, eta, alpha).sup_excess);
      ++tested;
    }
    res.pass = ok && tested > 0 && excess <= 2e-3;
    res.detail = detail::format("max phi(0)/2h^a %.3f; c0 %.4f, h0 %.2f, %d h tested, sup excess %.2e",
                                worst_phi0, c0, h0, tested, excess);
  });
}

// 9. Discrete superflow inequality along shrinking disks.
inline CriterionResult check_superflow(const SuiteOptions& o = {}) {
  return detail::run_timed(9, "superflow inequality", [&](CriterionResult& res) {
    const int n = o.quick ? 36 : 48;
    const GridSpec spec({n, n}, 1.0, 3);
    const double lambda = 3.0, R0 = o.quick ? 6.0 : 10.0;
    const std::vector<double> hs{0.5, 0.25, 0.125};
    double worst = -std::numeric_limits<double>::infinity(), lo = 0.0, hi = 0.0;
    bool ok = true;
    std::size_t cells = 0;
    for (std::size_t j = 0; j < hs.size(); ++j) {
      FlowConfig cfg{make_osc_params(spec, 2.0)};
      cfg.h = hs[j];
      cfg.t_max = o.quick ? 1.0 : 4.0;
      cfg.tol = 1e-7;
      cfg.max_iter = 200000;
      cfg.record_certificates = true;
      cfg.subcell_datum = true;
      const FlowTrajectory tr = run_flow(disk_mask(spec, R0), cfg);
      const SuperflowReport rep = superflow_inequality_check(tr, cfg.energy, lambda, 2e-3);
      ok = ok && rep.pass && !tr.domain_limited && rep.cells_checked > 0;
      worst = std::max(worst, rep.max_violation);
      cells += rep.cells_checked;
      lo = j == 0 ? rep.sup_div : std::min(lo, rep.sup_div);
      hi = std::max(hi, rep.sup_div);
    }
    const double ratio = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    res.pass = ok && ratio <= 2.0;
    res.detail = detail::format("%zu cells: max violation %.2e; sup (Div z)+ in [%.4f, %.4f], ratio %.3f",
                                cells, worst, lo, hi, ratio);
  });
}

// 10. Separation of nested sets along their flows.
inline CriterionResult check_avoidance(const SuiteOptions& o = {}) {
  return detail::run_timed(10, "avoidance", [&](CriterionResult& res) {
    const int runs = o.quick ? 2 : 10;
    const GridSpec spec({64, 64}, 1.0, 3);
    const double delta0 = 5.0;
    double worst = std::numeric_limits<double>::infinity();
    int extinct = 0;
    bool ok = true;
    for (int k = 0; k < runs; ++k) {
      const std::uint64_t s = detail::mix(o.seed, 1000 + k);
      const SetMask F0 = shape_mask(spec, parse_shape("blob:R=16,seed=" + std::to_string(s % 1000000)));
      // E0 = {x : dist(x, F0^c) >= delta0}: initial separation exactly delta0.
      const ScalarField dout = distance_to(complement(F0));
      SetMask E0(spec, 0);
      for (std::size_t i = 0; i < E0.size(); ++i) E0[i] = F0[i] && dout[i] >= delta0 ? 1 : 0;
      if (empty(E0)) continue;
      FlowConfig cfg{make_osc_params(spec, 2.0)};
      cfg.h = 4.0;
      cfg.t_max = 400.0;
      cfg.tol = 1e-6;
      cfg.max_iter = 200000;
      const FlowTrajectory tE = run_flow(E0, cfg);
      FlowConfig cfgF = cfg;
      cfgF.t_max = std::isfinite(tE.T_ext) ? std::max(tE.T_ext, cfg.h) : cfg.t_max;
      const FlowTrajectory tF = run_flow(F0, cfgF);
      const AvoidanceReport rep = avoidance_check(tE, tF, delta0);
      if (std::isfinite(tE.T_ext)) ++extinct;
      ok = ok && rep.pass && !tE.domain_limited && !tF.domain_limited;
      worst = std::min(worst, rep.min_separation);
    }
    res.pass = ok && extinct == runs;
    res.detail = detail::format("%d pairs, %d extinct: min separation %.3f (bound %.1f)", runs, extinct, worst,
                                delta0 - spec.dx());
  });
}

// 11. Independent subgradient solver against solve_rof.
inline CriterionResult check_cross_solver(const SuiteOptions& o = {}) {
  return detail::run_timed(11, "cross-solver agreement", [&](CriterionResult& res) {
    const int runs = o.quick ? 2 : 10;
    const long iters = 500000;
    const GridSpec spec({8, 8}, 1.0, 2);
    const std::vector<Energy> energies{make_osc_params(spec, 1.5), make_frac_params(spec, 0.5, 2.0)};
    double worst = 0.0;
    for (std::size_t ei = 0; ei < energies.size(); ++ei)
      for (int k = 0; k < runs; ++k) {
        SplitMix64 rng(detail::mix(o.seed, 1100 + 100 * ei + k));
        const RofProblem p{energies[ei], detail::uniform_field(spec, rng, -1.0, 1.0), rng.uniform(0.5, 2.0)};
        RofOptions opt;
        opt.tol = 1e-12;
        opt.max_iter = 1000000;
        const double ref = solve_rof(p, opt).primal;
        const double sg = oracle::subgradient_rof(p, iters).objective;
        worst = std::max(worst, std::abs(sg - ref) / std::max(std::abs(ref), 1e-300));
      }
    res.pass = worst <= 1e-6;
    res.detail = detail::format("%d instances per energy: worst relative objective gap %.2e", runs, worst);
  });
}

// 12. Bit-exact serialization round trips.
inline CriterionResult check_serialization(const SuiteOptions& o = {}) {
  return detail::run_timed(12, "serialization", [&](CriterionResult& res) {
    const int runs = o.quick ? 10 : 100;
    const auto dir = std::filesystem::temp_directory_path() /
                     ("nlflow_roundtrip_" + std::to_string(SplitMix64(std::chrono::steady_clock::now().time_since_epoch().count()).next()));
    std::filesystem::create_directories(dir);
    int failures = 0;
    auto same_bits = [](const std::vector<double>& a, const std::vector<double>& b) {
      return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
    };
    for (int k = 0; k < runs; ++k) {
      SplitMix64 rng(detail::mix(o.seed, 1200 + k));
      const bool three = rng.below(4) == 0;
      const int halo = 2 + static_cast<int>(rng.below(2));
      std::vector<int> dims;
      for (int a = 0; a < (three ? 3 : 2); ++a) dims.push_back(2 * halo + 1 + static_cast<int>(rng.below(three ? 6 : 14)));
      const GridSpec spec(dims, rng.uniform(0.1, 2.0), halo);
      ScalarField f(spec);
      for (double& v : f.raw()) {
        // Mix of ordinary, tiny, huge, negative zero and subnormal values.
        switch (rng.below(6)) {
          case 0: v = rng.normal() * 1e-300; break;
          case 1: v = rng.normal() * 1e300; break;
          case 2: v = -0.0; break;
          case 3: v = 4.9e-324 * double(rng.below(1000)); break;
          default: v = rng.normal();
        }
      }
      const ScalarField fb = io::decode_field(io::encode_field(f, io::Encoding::bin64));
      const ScalarField fa = io::decode_field(io::encode_field(f, io::Encoding::ascii));
      if (!(fb.spec() == spec) || !same_bits(fb.raw(), f.raw()) || !same_bits(fa.raw(), f.raw())) ++failures;

      SetMask m(spec);
      for (auto& b : m.raw()) b = rng.below(2) ? 1 : 0;
      if (spec.ndims() == 2) {
        if (!(io::decode_pgm(io::encode_pgm(m, true), spec) == m) || !(io::decode_pgm(io::encode_pgm(m, false), spec) == m))
          ++failures;
      }

      const double r = 1.0 + double(rng.below(2));
      Dual d;
      if (rng.below(2) == 0 && spec.halo() >= static_cast<int>(r) + 1) {
        OscDual z(spec, make_osc_params(spec, r * spec.dx()));
        for (double& v : z.a) v = rng.uniform();
        for (double& v : z.b) v = rng.uniform();
        d = z;
      } else {
        FracDual z(spec, make_frac_params(spec, 0.5, 2.0 * spec.dx()));
        for (double& v : z.z) v = rng.uniform(-1.0, 1.0);
        d = z;
      }
      const Dual back = io::decode_dual(io::encode_dual(d));
      if (!(back == d)) ++failures;

      if (k % 10 == 0) {
        const auto pf = dir / "f.nlf", pd = dir / "z.nld", pm = dir / "m.pgm";
        io::write_field(pf, f);
        io::write_dual(pd, d);
        if (!same_bits(io::read_field(pf).raw(), f.raw()) || !(io::read_dual(pd) == d)) ++failures;
        if (spec.ndims() == 2) {
          io::write_pgm(pm, m);
          if (!(io::read_pgm(pm, spec) == m)) ++failures;
        }
      }
    }
    std::filesystem::remove_all(dir);
    res.pass = failures == 0;
    res.detail = detail::format("%d field/mask/dual round trips: %d mismatches", runs, failures);
  });
}

struct Criterion {
  int id;
  const char* key;
  CriterionResult (*run)(const SuiteOptions&);
};

inline const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {1, "certificates", check_certificates}, {2, "oracle", check_oracle_equivalence},
      {3, "coarea", check_coarea},             {4, "comparison", check_comparison},
      {5, "lipschitz", check_lipschitz},       {6, "minkowski-ball", check_minkowski_ball},
      {7, "fractional-ball", check_fractional_ball}, {8, "ball-probe", check_ball_probe},
      {9, "superflow", check_superflow},       {10, "avoidance", check_avoidance},
      {11, "cross-solver", check_cross_solver}, {12, "serialization", check_serialization},
  };
  return all;
}

/// Criteria selected by a comma-separated list of keys or ids; "all" selects
/// everything and "quick" everything at reduced size.
inline std::vector<CriterionResult> run_suite(const std::string& suite, SuiteOptions opt = {},
                                              const std::function<void(const CriterionResult&)>& on_done = {}) {
  std::vector<std::string> keys;
  {
    std::string item;
    std::istringstream in(suite);
    while (std::getline(in, item, ','))
      if (!trim(item).empty()) keys.push_back(trim(item));
  }
  require(!keys.empty(), ErrorCode::invalid_argument, "empty suite");
  std::vector<const Criterion*> chosen;
  for (const std::string& key : keys) {
    if (key == "all" || key == "quick") {
      if (key == "quick") opt.quick = true;
      for (const Criterion& c : criteria()) chosen.push_back(&c);
      continue;
    }
    const Criterion* hit = nullptr;
    for (const Criterion& c : criteria())
      if (key == c.key || key == std::to_string(c.id)) hit = &c;
    require(hit != nullptr, ErrorCode::invalid_argument, "unknown criterion '" + key + "'");
    chosen.push_back(hit);
  }
  std::vector<CriterionResult> out;
  for (const Criterion* c : chosen) {
    out.push_back(c->run(opt));
    if (on_done) on_done(out.back());
  }
  return out;
}

inline std::string result_line(const CriterionResult& r) {
  return detail::format("[%s] %2d %-24s %7.1fs  ", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(), r.seconds) +
         r.detail;
}

}  // namespace nlflow::validation
