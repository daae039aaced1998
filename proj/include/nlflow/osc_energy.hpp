#pragma once

// Minkowski-type oscillation energies and their dual fields.
//
// J_r(u) = cv/(2r) * sum over windows w of (max - min of u on the ball at w).
// Windows are all centers whose stencil lies wholly inside the grid. The dual
// of a window is a pair of nonnegative weight vectors (a, b) over the stencil
// with equal mass at most 1; the pairing is cv/(2r) * sum_i (a_i - b_i) u(w+x_i).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "nlflow/error.hpp"
#include "nlflow/grid.hpp"

namespace nlflow {

struct OscEnergyParams {
  double r = 1.0;
  BallStencil stencil;
  double cell_volume = 1.0;
  WindowBox windows;

  /// cv/(2r), the factor in front of every window term.
  double coefficient() const { return cell_volume / (2.0 * r); }
};

inline OscEnergyParams make_osc_params(const GridSpec& spec, double r) {
  require(r > 0.0 && std::isfinite(r), ErrorCode::invalid_argument, "r must be positive");
  OscEnergyParams p;
  p.r = r;
  try {
    p.stencil = ball_offsets(spec, r, true);
  } catch (const Error& e) {
    throw Error(ErrorCode::insufficient_halo, e.what());
  }
  p.cell_volume = spec.cell_volume();
  p.windows = window_box(spec, p.stencil.reach);
  return p;
}

/// J^f quadrature: sum_i weight_i * J_{radius_i}.
struct WeightedOscParams {
  std::vector<double> radii;
  std::vector<double> weights;
  std::vector<OscEnergyParams> parts;
};

inline WeightedOscParams make_weighted_osc_params(const GridSpec& spec, std::vector<double> radii,
                                                  std::vector<double> weights) {
  require(!radii.empty() && radii.size() == weights.size(), ErrorCode::invalid_argument,
          "radii and weights must be nonempty and of equal length");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    require(radii[i] > 0.0, ErrorCode::invalid_argument, "radii must be positive");
    require(i == 0 || radii[i] > radii[i - 1], ErrorCode::invalid_argument,
            "radii must be strictly increasing");
    require(weights[i] >= 0.0 && std::isfinite(weights[i]), ErrorCode::invalid_argument,
            "weights must be nonnegative");
  }
  WeightedOscParams wp;
  wp.radii = std::move(radii);
  wp.weights = std::move(weights);
  for (double s : wp.radii) wp.parts.push_back(make_osc_params(spec, s));
  return wp;
}

namespace detail {
inline void check_grid(const GridSpec& a, const OscEnergyParams& p) {
  require(p.cell_volume == a.cell_volume() && p.stencil.reach + 1 <= a.halo(),
          ErrorCode::insufficient_halo, "stencil does not fit the field's halo");
  for (int ax = 0; ax < a.ndims(); ++ax)
    require(p.windows.hi[ax] == a.dim(ax) - p.stencil.reach, ErrorCode::invalid_argument,
            "energy parameters were built for a different grid");
}
}  // namespace detail

/// Sum of window oscillations (without the cv/2r factor).
inline double total_oscillation(const ScalarField& u, const OscEnergyParams& p) {
  double sum = 0.0;
  p.windows.for_each(u.spec(), [&](std::size_t, std::size_t center, const Coord&) {
    sum += window_osc(u.values(), p.stencil, center);
  });
  return sum;
}

inline double jr_value(const ScalarField& u, const OscEnergyParams& p) {
  detail::check_grid(u.spec(), p);
  return p.coefficient() * total_oscillation(u, p);
}

inline double perimeter_osc(const SetMask& E, const OscEnergyParams& p) {
  detail::check_grid(E.spec(), p);
  require(!touches_halo(E), ErrorCode::set_touches_boundary);
  std::size_t seen_both = 0;
  const auto& st = p.stencil;
  p.windows.for_each(E.spec(), [&](std::size_t, std::size_t center, const Coord&) {
    bool in = false, out = false;
    for (std::ptrdiff_t s : st.strides) {
      if (E[center + s]) in = true; else out = true;
      if (in && out) break;
    }
    if (in && out) ++seen_both;
  });
  return p.coefficient() * static_cast<double>(seen_both);
}

inline double jf_value(const ScalarField& u, const WeightedOscParams& wp) {
  double sum = 0.0;
  for (std::size_t i = 0; i < wp.parts.size(); ++i) sum += wp.weights[i] * jr_value(u, wp.parts[i]);
  return sum;
}

/// Marginal representation of a window-wise pair measure.
struct OscDual {
  GridSpec spec;
  std::size_t windows = 0;
  std::size_t width = 0;  ///< stencil size
  std::vector<double> a;  ///< windows * width, window-major
  std::vector<double> b;

  OscDual() = default;
  OscDual(const GridSpec& s, const OscEnergyParams& p)
      : spec(s), windows(p.windows.count()), width(p.stencil.size()),
        a(windows * width, 0.0), b(windows * width, 0.0) {}

  std::span<double> a_of(std::size_t w) { return {a.data() + w * width, width}; }
  std::span<double> b_of(std::size_t w) { return {b.data() + w * width, width}; }
  std::span<const double> a_of(std::size_t w) const { return {a.data() + w * width, width}; }
  std::span<const double> b_of(std::size_t w) const { return {b.data() + w * width, width}; }

  double mass(std::size_t w) const {
    auto s = a_of(w);
    return std::accumulate(s.begin(), s.end(), 0.0);
  }

  friend bool operator==(const OscDual&, const OscDual&) = default;
};

/// Sum-of-radii dual for J^f: one OscDual per radius.
struct WeightedOscDual {
  std::vector<OscDual> parts;
  friend bool operator==(const WeightedOscDual&, const WeightedOscDual&) = default;
};

inline bool osc_dual_feasible(const OscDual& z, double tol = 1e-9) {
  for (std::size_t w = 0; w < z.windows; ++w) {
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < z.width; ++i) {
      const double ai = z.a[w * z.width + i], bi = z.b[w * z.width + i];
      if (!(ai >= -tol) || !(bi >= -tol)) return false;
      sa += ai;
      sb += bi;
    }
    if (std::abs(sa - sb) > tol || sa > 1.0 + tol) return false;
  }
  return true;
}

/// out[q] += coef * sum over windows covering q of (a - b) at q.
/// Gather form: each output cell is written by one iteration only.
inline void osc_adjoint_accumulate(const OscDual& z, const OscEnergyParams& p, double coef,
                                   std::span<double> out) {
  const GridSpec& spec = z.spec;
  const auto& st = p.stencil;
  const std::size_t n = st.size();
  for_each_cell(spec, [&](const Coord& q, std::size_t qi) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Coord& o = st.offsets[i];
      const Coord w{q[0] - o[0], q[1] - o[1], q[2] - o[2]};
      if (!p.windows.contains(w)) continue;
      const std::size_t k = p.windows.ordinal(w) * n + i;
      acc += z.a[k] - z.b[k];
    }
    out[qi] += coef * acc;
  });
}

/// Field D with sum_p D(p) phi(p) cv = -(cv/2r) sum_w sum_i (a phi(w+x_i) - b phi(w+x_i)).
inline ScalarField osc_divergence(const OscDual& z, const OscEnergyParams& p) {
  require(z.width == p.stencil.size() && z.windows == p.windows.count(),
          ErrorCode::invalid_argument, "dual does not match energy parameters");
  require(osc_dual_feasible(z), ErrorCode::infeasible_dual);
  ScalarField d(z.spec, 0.0);
  osc_adjoint_accumulate(z, p, -1.0 / (2.0 * p.r), d.raw());
  return d;
}

inline ScalarField weighted_osc_divergence(const WeightedOscDual& z, const WeightedOscParams& wp) {
  require(z.parts.size() == wp.parts.size(), ErrorCode::invalid_argument,
          "dual does not match energy parameters");
  ScalarField d(z.parts.at(0).spec, 0.0);
  for (std::size_t i = 0; i < wp.parts.size(); ++i) {
    require(osc_dual_feasible(z.parts[i]), ErrorCode::infeasible_dual);
    osc_adjoint_accumulate(z.parts[i], wp.parts[i], -wp.weights[i] / (2.0 * wp.parts[i].r),
                           d.raw());
  }
  return d;
}

/// cv/(2r) * sum_w (<a_w,u> - <b_w,u>).
inline double osc_pairing(const ScalarField& u, const OscDual& z, const OscEnergyParams& p) {
  const auto& st = p.stencil;
  double sum = 0.0;
  p.windows.for_each(u.spec(), [&](std::size_t w, std::size_t center, const Coord&) {
    for (std::size_t i = 0; i < st.size(); ++i)
      sum += (z.a[w * st.size() + i] - z.b[w * st.size() + i]) * u[center + st.strides[i]];
  });
  return p.coefficient() * sum;
}

/// Dual attaining J_r(u): unit mass at the (lexicographically first) argmax
/// and argmin of every window with positive oscillation.
inline OscDual osc_certificate(const ScalarField& u, const OscEnergyParams& p) {
  OscDual z(u.spec(), p);
  const auto& st = p.stencil;
  const std::size_t n = st.size();
  p.windows.for_each(u.spec(), [&](std::size_t w, std::size_t center, const Coord&) {
    std::size_t imin = 0, imax = 0;
    for (std::size_t i = 1; i < n; ++i) {
      const double v = u[center + st.strides[i]];
      if (v < u[center + st.strides[imin]]) imin = i;
      if (v > u[center + st.strides[imax]]) imax = i;
    }
    if (u[center + st.strides[imax]] > u[center + st.strides[imin]]) {
      z.a[w * n + imax] = 1.0;
      z.b[w * n + imin] = 1.0;
    }
  });
  return z;
}

struct WindowSlack {
  std::size_t window = 0;
  Coord center{0, 0, 0};
  double slack = 0.0;
  double mass = 0.0;
};

struct OscCertificateReport {
  double max_slack = 0.0;        ///< over all windows
  double max_slack_unit = 0.0;   ///< over windows with unit mass
  double min_slack = 0.0;
  double weighted_slack = 0.0;   ///< cv/(2r) * sum of slacks = J(u) - pairing
  std::size_t mass_violations = 0;
  std::size_t deficient_windows = 0;  ///< osc > tol but mass < 1
  std::vector<WindowSlack> worst;     ///< up to 8 largest slacks
  bool pass = false;
};

/// Per-window complementarity slack osc_w - (<a_w,u> - <b_w,u>).
inline OscCertificateReport dual_certificate_check(const ScalarField& u, const OscDual& z,
                                                   const OscEnergyParams& p, double tol) {
  OscCertificateReport rep;
  const auto& st = p.stencil;
  const std::size_t n = st.size();
  bool first = true;
  std::vector<WindowSlack> all;
  p.windows.for_each(u.spec(), [&](std::size_t w, std::size_t center, const Coord& c) {
    double lo = u[center + st.strides[0]], hi = lo, pa = 0.0, sa = 0.0, sb = 0.0;
    bool negative = false;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = u[center + st.strides[i]];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      const double ai = z.a[w * n + i], bi = z.b[w * n + i];
      if (ai < -tol || bi < -tol) negative = true;
      pa += (ai - bi) * v;
      sa += ai;
      sb += bi;
    }
    const double osc = hi - lo;
    const double slack = osc - pa;
    if (negative || std::abs(sa - sb) > tol || sa > 1.0 + tol) ++rep.mass_violations;
    if (osc > tol && sa < 1.0 - tol) ++rep.deficient_windows;
    if (first) {
      rep.max_slack = rep.min_slack = slack;
      first = false;
    }
    rep.max_slack = std::max(rep.max_slack, slack);
    rep.min_slack = std::min(rep.min_slack, slack);
    if (sa >= 1.0 - tol) rep.max_slack_unit = std::max(rep.max_slack_unit, slack);
    rep.weighted_slack += slack;
    if (slack > tol) all.push_back({w, c, slack, sa});
  });
  rep.weighted_slack *= p.coefficient();
  std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return x.slack > y.slack; });
  if (all.size() > 8) all.resize(8);
  rep.worst = std::move(all);
  rep.pass = rep.mass_violations == 0 && rep.min_slack >= -tol && rep.max_slack <= tol;
  return rep;
}

namespace detail {

/// Euclidean projection of v onto {x >= 0, sum x = mass}, mass > 0.
inline void project_simplex(std::span<const double> v, double mass, std::span<double> out,
                            std::vector<double>& scratch) {
  scratch.assign(v.begin(), v.end());
  std::sort(scratch.begin(), scratch.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t k = 0; k < scratch.size(); ++k) {
    cum += scratch[k];
    const double t = (cum - mass) / double(k + 1);
    if (k + 1 == scratch.size() || scratch[k + 1] <= t) {
      theta = t;
      break;
    }
  }
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(0.0, v[i] - theta);
}

/// Threshold tau with sum (y - tau)^+ = mass (Condat's linear-time scan);
/// `buf` must hold 2n values.
inline double simplex_threshold(const double* y, std::size_t n, double mass, double* buf) {
  double* v = buf;
  double* rest = buf + n;
  std::size_t nv = 0, nr = 0;
  v[nv++] = y[0];
  double rho = y[0] - mass;
  for (std::size_t i = 1; i < n; ++i) {
    if (y[i] <= rho) continue;
    rho += (y[i] - rho) / double(nv + 1);
    if (rho > y[i] - mass) {
      v[nv++] = y[i];
    } else {
      for (std::size_t k = 0; k < nv; ++k) rest[nr++] = v[k];
      nv = 0;
      v[nv++] = y[i];
      rho = y[i] - mass;
    }
  }
  for (std::size_t k = 0; k < nr; ++k)
    if (rest[k] > rho) {
      v[nv++] = rest[k];
      rho += (rest[k] - rho) / double(nv);
    }
  bool changed = true;
  while (changed) {
    changed = false;
    std::size_t keep = 0, count = nv;
    for (std::size_t k = 0; k < nv; ++k) {
      if (v[k] > rho) {
        v[keep++] = v[k];
      } else {
        --count;
        rho += (rho - v[k]) / double(count);
        changed = true;
      }
    }
    nv = keep;
  }
  return rho;
}

/// In-place projection onto the unit simplex.
inline void project_unit_simplex(std::span<double> v, std::vector<double>& scratch) {
  scratch.resize(2 * v.size());
  const double tau = simplex_threshold(v.data(), v.size(), 1.0, scratch.data());
  for (double& x : v) x = std::max(0.0, x - tau);
}

}  // namespace detail

/// Projection onto {a, b >= 0, sum a = sum b <= 1}.
///
/// KKT: a' = (a - alpha)^+, b' = (b + alpha)^+ while the common mass is below
/// one; otherwise both are unit-simplex projections. alpha solves the monotone
/// piecewise-linear balance sum (a - alpha)^+ = sum (b + alpha)^+.
inline void project_osc_dual(std::span<double> a, std::span<double> b,
                             std::vector<double>& scratch) {
  const std::size_t n = a.size();
  scratch.clear();
  for (std::size_t i = 0; i < n; ++i) scratch.push_back(a[i]);
  for (std::size_t i = 0; i < n; ++i) scratch.push_back(-b[i]);
  std::sort(scratch.begin(), scratch.end());

  auto balance = [&](double al) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      f += std::max(0.0, a[i] - al);
      f -= std::max(0.0, b[i] + al);
    }
    return f;
  };

  // Bracket the root between consecutive breakpoints; outside the extreme
  // breakpoints the balance is affine with slope -n.
  const std::size_t m = scratch.size();
  double alpha;
  const double f_lo = balance(scratch.front());
  const double f_hi = balance(scratch.back());
  if (f_lo <= 0.0) {
    alpha = scratch.front() + f_lo / double(n);
  } else if (f_hi >= 0.0) {
    alpha = scratch.back() + f_hi / double(n);
  } else {
    std::size_t lo = 0, hi = m - 1;
    double flo = f_lo, fhi = f_hi;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      const double fm = balance(scratch[mid]);
      if (fm > 0.0) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
        fhi = fm;
      }
    }
    alpha = flo == fhi ? scratch[lo]
                       : scratch[lo] + flo * (scratch[hi] - scratch[lo]) / (flo - fhi);
  }

  double mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) mass += std::max(0.0, a[i] - alpha);
  if (mass <= 1.0) {
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = std::max(0.0, a[i] - alpha);
      b[i] = std::max(0.0, b[i] + alpha);
    }
    // Equalize the masses exactly; the two sums differ only by rounding.
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sa += a[i];
      sb += b[i];
    }
    if (sb > 0.0 && sa != sb) {
      const double scale = sa / sb;
      for (std::size_t i = 0; i < n; ++i) b[i] *= scale;
    }
    return;
  }
  detail::project_unit_simplex(a, scratch);
  detail::project_unit_simplex(b, scratch);
}

inline void project_osc_dual(std::span<double> a, std::span<double> b) {
  std::vector<double> scratch;
  project_osc_dual(a, b, scratch);
}

inline void project_osc_dual(OscDual& z) {
  std::vector<double> scratch;
  for (std::size_t w = 0; w < z.windows; ++w) project_osc_dual(z.a_of(w), z.b_of(w), scratch);
}

}  // namespace nlflow
