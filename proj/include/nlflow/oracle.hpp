#pragma once

// Slow reference computations. Nothing here calls the fast kernels of the
// energy, distance or solver headers: stencils, pair lists and window scans
// are rebuilt from the raw parameters (r, s, cutoff, weights).

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include "nlflow/error.hpp"
#include "nlflow/grid.hpp"
#include "nlflow/rof_solver.hpp"

namespace nlflow::oracle {

struct EnumerationBudget {
  int max_cells = 16;
  double timeout = 120.0;  ///< seconds
};

namespace detail {

/// One energy term seen from the free cells of a grid.
struct BruteTerms {
  // Oscillation windows: free cells covered (bit mask) and whether the
  // window also covers a fixed cell; coefficient per window.
  std::vector<std::uint32_t> win_mask;
  std::vector<std::uint8_t> win_fixed;
  std::vector<double> win_coef;
  // Fractional pairs among free cells and per-cell coupling to fixed cells.
  std::vector<std::vector<double>> pair_w;
  std::vector<double> ext_w;
};

struct RawOsc {
  double r, weight;
};

inline std::vector<RawOsc> raw_osc_terms(const Energy& e) {
  std::vector<RawOsc> out;
  if (auto* p = std::get_if<OscEnergyParams>(&e)) out.push_back({p->r, 1.0});
  if (auto* w = std::get_if<WeightedOscParams>(&e))
    for (std::size_t i = 0; i < w->radii.size(); ++i) out.push_back({w->radii[i], w->weights[i]});
  return out;
}

/// Cells within distance r of c (closed ball), row-major order; empty if
/// the ball leaves the grid.
inline std::vector<std::size_t> brute_ball(const GridSpec& spec, const Coord& c, double r) {
  std::vector<std::size_t> cells;
  const double r2 = (r / spec.dx()) * (r / spec.dx()) * (1.0 + 1e-12);
  const int R = static_cast<int>(std::floor(r / spec.dx() * (1.0 + 1e-12)));
  for (int a = 0; a < spec.ndims(); ++a)
    if (c[a] - R < 0 || c[a] + R >= spec.dim(a)) return {};
  for_each_cell(spec, [&](const Coord& y, std::size_t j) {
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) d2 += double(y[a] - c[a]) * (y[a] - c[a]);
    if (d2 <= r2) cells.push_back(j);
  });
  return cells;
}

inline double dist_cells(const Coord& a, const Coord& b) {
  double d2 = 0.0;
  for (int k = 0; k < 3; ++k) d2 += double(a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(d2);
}

inline BruteTerms build_terms(const GridSpec& spec, const Energy& e,
                              const std::vector<std::size_t>& free_cells) {
  BruteTerms t;
  std::vector<int> slot(spec.size(), -1);
  for (std::size_t k = 0; k < free_cells.size(); ++k) slot[free_cells[k]] = static_cast<int>(k);
  const double cv = spec.cell_volume();
  for (const RawOsc& term : raw_osc_terms(e)) {
    for_each_cell(spec, [&](const Coord& c, std::size_t) {
      const auto ball = brute_ball(spec, c, term.r);
      if (ball.empty()) return;
      std::uint32_t mask = 0;
      bool fixed = false;
      for (std::size_t j : ball) {
        if (slot[j] >= 0) mask |= 1u << slot[j];
        else fixed = true;
      }
      t.win_mask.push_back(mask);
      t.win_fixed.push_back(fixed ? 1 : 0);
      t.win_coef.push_back(term.weight * cv / (2.0 * term.r));
    });
  }
  if (auto* f = std::get_if<FracEnergyParams>(&e)) {
    const std::size_t n = free_cells.size();
    const double cs = (1.0 - f->s) / (spec.ndims() == 2 ? 2.0 : std::numbers::pi);
    t.pair_w.assign(n, std::vector<double>(n, 0.0));
    t.ext_w.assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      const Coord x = spec.coord(free_cells[k]);
      for_each_cell(spec, [&](const Coord& y, std::size_t j) {
        const double d = dist_cells(x, y) * spec.dx();
        if (j == free_cells[k] || d > f->cutoff * (1.0 + 1e-12)) return;
        const double w = cs / std::pow(d, spec.ndims() + f->s) * cv * cv;
        if (slot[j] >= 0) t.pair_w[k][slot[j]] = w;
        else t.ext_w[k] += w;
      });
    }
  }
  return t;
}

inline double subset_perimeter(const BruteTerms& t, std::uint32_t F, std::size_t n) {
  double p = 0.0;
  for (std::size_t w = 0; w < t.win_mask.size(); ++w) {
    const std::uint32_t m = t.win_mask[w];
    const bool in = (m & F) != 0;
    const bool out = t.win_fixed[w] || (m & ~F) != 0;
    if (in && out) p += t.win_coef[w];
  }
  if (!t.ext_w.empty())
    for (std::size_t i = 0; i < n; ++i) {
      if (!(F >> i & 1u)) continue;
      p += t.ext_w[i];
      for (std::size_t j = 0; j < n; ++j)
        if (!(F >> j & 1u)) p += t.pair_w[i][j];
    }
  return p;
}

inline std::vector<std::size_t> free_cells_of(const GridSpec& spec) {
  std::vector<std::size_t> cells;
  for_each_cell(spec, [&](const Coord& c, std::size_t i) {
    if (!spec.in_halo(c)) cells.push_back(i);
  });
  return cells;
}

inline SetMask mask_of(const GridSpec& spec, const std::vector<std::size_t>& cells,
                       std::uint32_t F) {
  SetMask m(spec, 0);
  for (std::size_t k = 0; k < cells.size(); ++k)
    if (F >> k & 1u) m[cells[k]] = 1;
  return m;
}

}  // namespace detail

struct EnumerationResult {
  double min_value = 0.0;
  std::vector<SetMask> minimizers;  ///< capped at 4096
  SetMask minimal;                  ///< intersection of all minimizers
  SetMask maximal;                  ///< union of all minimizers
  bool lattice = true;              ///< minimal and maximal are themselves minimizers
};

/// Exhaustive minimization of P(F) + (1/h) sum_F (g - t) cv over subsets F
/// of the free cells; the halo is held outside F.
inline EnumerationResult enumerate_geometric(const ScalarField& g, double h, const Energy& e,
                                             double t = 0.0, const EnumerationBudget& budget = {}) {
  const GridSpec& spec = g.spec();
  require(budget.max_cells <= 20, ErrorCode::invalid_argument, "max_cells must be at most 20");
  const auto cells = detail::free_cells_of(spec);
  require(static_cast<int>(cells.size()) <= budget.max_cells, ErrorCode::budget_exceeded,
          std::to_string(cells.size()) + " free cells");
  const auto terms = detail::build_terms(spec, e, cells);
  const std::size_t n = cells.size();
  const double cv = spec.cell_volume();
  std::vector<double> bulk(n);
  for (std::size_t k = 0; k < n; ++k) bulk[k] = (g[cells[k]] - t) * cv / h;

  const auto start = std::chrono::steady_clock::now();
  const std::uint32_t total = 1u << n;
  std::vector<double> value(total);
  for (std::uint32_t F = 0; F < total; ++F) {
    double v = detail::subset_perimeter(terms, F, n);
    for (std::size_t k = 0; k < n; ++k)
      if (F >> k & 1u) v += bulk[k];
    value[F] = v;
    if ((F & 0xFFF) == 0 &&
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >
            budget.timeout)
      throw Error(ErrorCode::budget_exceeded, "enumeration timed out");
  }
  EnumerationResult res;
  res.min_value = *std::min_element(value.begin(), value.end());
  const double eps = 1e-9 * std::max(1.0, std::abs(res.min_value));
  std::uint32_t meet = total - 1, join = 0;
  for (std::uint32_t F = 0; F < total; ++F) {
    if (value[F] > res.min_value + eps) continue;
    meet &= F;
    join |= F;
    if (res.minimizers.size() < 4096) res.minimizers.push_back(detail::mask_of(spec, cells, F));
  }
  res.minimal = detail::mask_of(spec, cells, meet);
  res.maximal = detail::mask_of(spec, cells, join);
  res.lattice = value[meet] <= res.min_value + eps && value[join] <= res.min_value + eps;
  return res;
}

/// Geometric energy P(F) + (1/h) sum_F (g - t) cv of one subset (brute force).
inline double geometric_energy(const SetMask& F, const ScalarField& g, double h, const Energy& e,
                               double t) {
  const GridSpec& spec = g.spec();
  require(!touches_halo(F), ErrorCode::set_touches_boundary);
  const auto cells = detail::free_cells_of(spec);
  require(cells.size() <= 32, ErrorCode::budget_exceeded, "too many free cells");
  const auto terms = detail::build_terms(spec, e, cells);
  std::uint32_t bits = 0;
  double bulk = 0.0;
  for (std::size_t k = 0; k < cells.size(); ++k)
    if (F[cells[k]]) {
      bits |= 1u << k;
      bulk += (g[cells[k]] - t) * spec.cell_volume() / h;
    }
  return detail::subset_perimeter(terms, bits, cells.size()) + bulk;
}

/// Exact ROF minimizer for tiny grids with g > all free values on the halo.
/// For each cardinality m the best subset has intercept b_m; the geometric
/// minimum at level t is min_m (b_m - t m cv / h), so the jump levels of the
/// lower envelope are the values taken by u.
struct EnvelopeResult {
  std::vector<double> levels;  ///< increasing jump levels
  ScalarField u;               ///< exact minimizer (halo = g)
  bool unique = true;          ///< every envelope cardinality had a unique best subset
};

inline EnvelopeResult exact_rof_envelope(const ScalarField& g, double h, const Energy& e,
                                         const EnumerationBudget& budget = {}) {
  const GridSpec& spec = g.spec();
  const auto cells = detail::free_cells_of(spec);
  const std::size_t n = cells.size();
  require(static_cast<int>(n) <= budget.max_cells, ErrorCode::budget_exceeded);
  const auto terms = detail::build_terms(spec, e, cells);
  const double cv = spec.cell_volume();
  double gmax_free = -std::numeric_limits<double>::infinity();
  double gmin_halo = std::numeric_limits<double>::infinity();
  for_each_cell(spec, [&](const Coord& c, std::size_t i) {
    if (spec.in_halo(c)) gmin_halo = std::min(gmin_halo, g[i]);
    else gmax_free = std::max(gmax_free, g[i]);
  });
  require(gmin_halo > gmax_free, ErrorCode::invalid_argument,
          "halo data must exceed the free data");

  std::vector<double> best(n + 1, std::numeric_limits<double>::infinity());
  std::vector<std::uint32_t> arg(n + 1, 0);
  std::vector<int> ties(n + 1, 0);
  for (std::uint32_t F = 0; F < (1u << n); ++F) {
    double v = detail::subset_perimeter(terms, F, n);
    for (std::size_t k = 0; k < n; ++k)
      if (F >> k & 1u) v += g[cells[k]] * cv / h;
    const int m = std::popcount(F);
    const double eps = 1e-10 * std::max(1.0, std::abs(v));
    if (v < best[m] - eps) {
      best[m] = v;
      arg[m] = F;
      ties[m] = 0;
    } else if (std::abs(v - best[m]) <= eps) {
      ++ties[m];
    }
  }
  // Lower envelope of lines b_m - t * m * cv / h, walking t upward from -inf
  // (m = 0) to +inf (m = n).
  EnvelopeResult res;
  res.u = g;
  const double slope = cv / h;
  std::size_t cur = 0;
  while (cur < n) {
    double t_next = std::numeric_limits<double>::infinity();
    std::size_t m_next = cur;
    for (std::size_t m = cur + 1; m <= n; ++m) {
      const double tm = (best[m] - best[cur]) / (slope * double(m - cur));
      if (tm < t_next - 1e-14 || (std::abs(tm - t_next) <= 1e-14 && m > m_next)) {
        t_next = tm;
        m_next = m;
      }
    }
    if (ties[m_next] > 0) res.unique = false;
    const std::uint32_t added = arg[m_next] & ~arg[cur];
    if ((arg[cur] & ~arg[m_next]) != 0) res.unique = false;  // not nested
    for (std::size_t k = 0; k < n; ++k)
      if (added >> k & 1u) res.u[cells[k]] = t_next;
    res.levels.push_back(t_next);
    cur = m_next;
  }
  return res;
}

struct SubgradientResult {
  double objective = 0.0;
  ScalarField u;
  long iterations = 0;
};

enum class SubgradientSteps {
  inv_sqrt,    ///< 1/sqrt(k) from the current iterate, best objective kept
  strong_avg,  ///< 2/(mu (k+1)) with weighted averaging (strong convexity)
};

namespace detail {

struct BruteObjective {
  GridSpec spec;
  std::vector<std::vector<std::size_t>> windows;  // cell lists
  std::vector<double> win_coef;
  std::vector<std::size_t> px, py;
  std::vector<double> pw;
  std::vector<std::uint8_t> free;
  double gamma = 1.0;

  BruteObjective(const GridSpec& s, const Energy& e, double h) : spec(s) {
    const double cv = s.cell_volume();
    gamma = cv / h;
    for (const RawOsc& term : raw_osc_terms(e))
      for_each_cell(s, [&](const Coord& c, std::size_t) {
        auto ball = brute_ball(s, c, term.r);
        if (ball.empty()) return;
        windows.push_back(std::move(ball));
        win_coef.push_back(term.weight * cv / (2.0 * term.r));
      });
    if (auto* f = std::get_if<FracEnergyParams>(&e)) {
      const double cs = (1.0 - f->s) / (s.ndims() == 2 ? 2.0 : std::numbers::pi);
      for_each_cell(s, [&](const Coord& x, std::size_t i) {
        for_each_cell(s, [&](const Coord& y, std::size_t j) {
          if (j <= i) return;
          const double d = dist_cells(x, y) * s.dx();
          if (d > f->cutoff * (1.0 + 1e-12)) return;
          px.push_back(i);
          py.push_back(j);
          pw.push_back(cs / std::pow(d, s.ndims() + f->s) * cv * cv);
        });
      });
    }
    free.resize(s.size());
    for_each_cell(s, [&](const Coord& c, std::size_t i) { free[i] = s.in_halo(c) ? 0 : 1; });
  }

  double value(const std::vector<double>& u, const std::vector<double>& g) const {
    double v = 0.0;
    for (std::size_t w = 0; w < windows.size(); ++w) {
      double lo = u[windows[w][0]], hi = lo;
      for (std::size_t j : windows[w]) {
        lo = std::min(lo, u[j]);
        hi = std::max(hi, u[j]);
      }
      v += win_coef[w] * (hi - lo);
    }
    for (std::size_t k = 0; k < px.size(); ++k) v += pw[k] * std::abs(u[px[k]] - u[py[k]]);
    for (std::size_t i = 0; i < u.size(); ++i)
      if (free[i]) v += 0.5 * gamma * (u[i] - g[i]) * (u[i] - g[i]);
    return v;
  }

  void subgradient(const std::vector<double>& u, const std::vector<double>& g,
                   std::vector<double>& s) const {
    std::fill(s.begin(), s.end(), 0.0);
    for (std::size_t w = 0; w < windows.size(); ++w) {
      std::size_t imin = windows[w][0], imax = imin;
      for (std::size_t j : windows[w]) {
        if (u[j] < u[imin]) imin = j;
        if (u[j] > u[imax]) imax = j;
      }
      if (u[imax] > u[imin]) {
        s[imax] += win_coef[w];
        s[imin] -= win_coef[w];
      }
    }
    for (std::size_t k = 0; k < px.size(); ++k) {
      const double d = u[px[k]] - u[py[k]];
      const double sg = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      s[px[k]] += pw[k] * sg;
      s[py[k]] -= pw[k] * sg;
    }
    for (std::size_t i = 0; i < u.size(); ++i) s[i] = free[i] ? s[i] + gamma * (u[i] - g[i]) : 0.0;
  }
};

}  // namespace detail

/// Projected subgradient descent on the full ROF objective (halo pinned).
inline SubgradientResult subgradient_rof(const RofProblem& p, long iters,
                                         SubgradientSteps steps = SubgradientSteps::strong_avg) {
  const GridSpec& spec = p.g.spec();
  require(spec.size() <= 16 * 16 * 16, ErrorCode::budget_exceeded, "grid too large for the oracle");
  const detail::BruteObjective obj(spec, p.energy, p.h);
  const std::vector<double>& g = p.g.raw();
  std::vector<double> u = g, s(u.size()), avg = g, best = g;
  double best_val = obj.value(u, g);
  double wsum = 0.0;
  for (long k = 1; k <= iters; ++k) {
    obj.subgradient(u, g, s);
    double norm2 = 0.0;
    for (double v : s) norm2 += v * v;
    if (norm2 == 0.0) break;  // 0 is a subgradient: u is optimal
    const double step = steps == SubgradientSteps::inv_sqrt ? 1.0 / std::sqrt(double(k) * norm2)
                                                             : 2.0 / (obj.gamma * double(k + 1));
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = obj.free[i] ? u[i] - step * s[i] : g[i];
    if (steps == SubgradientSteps::strong_avg) {
      // Weights proportional to k.
      const double wk = double(k);
      wsum += wk;
      for (std::size_t i = 0; i < u.size(); ++i) avg[i] += (wk / wsum) * (u[i] - avg[i]);
    }
    if ((k & 63) == 0 || k == iters) {
      const double v = obj.value(u, g);
      if (v < best_val) {
        best_val = v;
        best = u;
      }
      if (steps == SubgradientSteps::strong_avg) {
        const double va = obj.value(avg, g);
        if (va < best_val) {
          best_val = va;
          best = avg;
        }
      }
    }
  }
  SubgradientResult res;
  res.objective = best_val;
  res.u = ScalarField(spec, best);
  res.iterations = iters;
  return res;
}

/// Truncated fractional energy by a double loop over all cell pairs.
inline double brute_pairsum(const ScalarField& u, double s, double cutoff) {
  const GridSpec& spec = u.spec();
  const double cs = (1.0 - s) / (spec.ndims() == 2 ? 2.0 : std::numbers::pi);
  const double cv = spec.cell_volume();
  double sum = 0.0;
  for_each_cell(spec, [&](const Coord& x, std::size_t i) {
    for_each_cell(spec, [&](const Coord& y, std::size_t j) {
      if (i == j) return;
      const double d = detail::dist_cells(x, y) * spec.dx();
      if (d > cutoff * (1.0 + 1e-12)) return;
      sum += cs / std::pow(d, spec.ndims() + s) * std::abs(u[i] - u[j]);
    });
  });
  return 0.5 * sum * cv * cv;
}

/// Oscillation energy (cv/2r) sum over in-grid balls, by explicit ball scans.
inline double brute_jr(const ScalarField& u, double r) {
  const GridSpec& spec = u.spec();
  double sum = 0.0;
  for_each_cell(spec, [&](const Coord& c, std::size_t) {
    const auto ball = detail::brute_ball(spec, c, r);
    if (ball.empty()) return;
    double lo = u[ball[0]], hi = lo;
    for (std::size_t j : ball) {
      lo = std::min(lo, u[j]);
      hi = std::max(hi, u[j]);
    }
    sum += hi - lo;
  });
  return spec.cell_volume() / (2.0 * r) * sum;
}

/// Signed distance by scanning every opposite-phase cell; same calibration
/// and sentinels as the fast transform.
inline ScalarField brute_distance(const SetMask& E, double calibration = -1.0) {
  const GridSpec& spec = E.spec();
  const double delta = calibration < 0.0 ? 0.5 * spec.dx() : calibration;
  const std::size_t members = count(E);
  if (members == 0) return ScalarField(spec, spec.diagonal());
  if (members == E.size()) return ScalarField(spec, -spec.diagonal());
  ScalarField d(spec);
  for_each_cell(spec, [&](const Coord& x, std::size_t i) {
    double best = std::numeric_limits<double>::infinity();
    for_each_cell(spec, [&](const Coord& y, std::size_t j) {
      if (E[j] != E[i]) best = std::min(best, detail::dist_cells(x, y));
    });
    const double mag = best * spec.dx() - delta;
    d[i] = E[i] ? -mag : mag;
  });
  return d;
}

/// Extrema over the closed ball of radius r at w by a full-grid scan; ties
/// go to the first cell in row-major order (the lexicographically first offset).
inline WindowExtrema brute_window(const ScalarField& u, double r, const Coord& w) {
  const GridSpec& spec = u.spec();
  const auto ball = detail::brute_ball(spec, w, r);
  require(!ball.empty(), ErrorCode::window_out_of_bounds);
  WindowExtrema ex;
  std::size_t imin = ball[0], imax = ball[0];
  for (std::size_t j : ball) {
    if (u[j] < u[imin]) imin = j;
    if (u[j] > u[imax]) imax = j;
  }
  ex.min = u[imin];
  ex.max = u[imax];
  const Coord cmin = spec.coord(imin), cmax = spec.coord(imax);
  for (int a = 0; a < 3; ++a) {
    ex.argmin[a] = cmin[a] - w[a];
    ex.argmax[a] = cmax[a] - w[a];
  }
  return ex;
}

}  // namespace nlflow::oracle
