#pragma once

// Truncated s-fractional total variation on the grid.
//
// Each unordered pair of cells {x, y} with 0 < |x - y| <= L contributes
// k(x - y) |u(x) - u(y)| cv^2 with k(p) = c_s / |p|^(N+s). Pairs are stored
// once, from the cell x towards y = x + p with p in the positive
// lexicographic half of the stencil.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "nlflow/error.hpp"
#include "nlflow/grid.hpp"

namespace nlflow {

/// (1 - s) / omega_{N-1}, with omega_1 = 2 and omega_2 = pi.
inline double cs_constant(int N, double s) {
  require(s > 0.0 && s < 1.0, ErrorCode::invalid_argument, "s must lie in (0,1)");
  require(N == 2 || N == 3, ErrorCode::invalid_argument, "N must be 2 or 3");
  const double omega = N == 2 ? 2.0 : std::numbers::pi;
  return (1.0 - s) / omega;
}

struct FracEnergyParams {
  int N = 2;
  double s = 0.5;
  double c_s = 0.25;
  double cutoff = 8.0;
  double dx = 1.0;
  double cell_volume = 1.0;
  int reach = 8;
  std::vector<Coord> offsets;           ///< positive lexicographic half stencil
  std::vector<std::ptrdiff_t> strides;  ///< on the grid the params were built for
  std::vector<double> kernel;           ///< c_s / (|p| dx)^(N+s)

  std::size_t width() const { return offsets.size(); }
  /// Pair weight in the energy: kernel * cv^2.
  double pair_weight(std::size_t j) const { return kernel[j] * cell_volume * cell_volume; }
};

inline bool lex_positive(const Coord& p) {
  for (int a = 0; a < 3; ++a) {
    if (p[a] > 0) return true;
    if (p[a] < 0) return false;
  }
  return false;
}

inline FracEnergyParams make_frac_params(const GridSpec& spec, double s, double cutoff) {
  FracEnergyParams p;
  p.N = spec.ndims();
  p.s = s;
  p.c_s = cs_constant(p.N, s);
  p.dx = spec.dx();
  p.cell_volume = spec.cell_volume();
  require(cutoff >= 2.0 * spec.dx() && std::isfinite(cutoff), ErrorCode::invalid_argument,
          "cutoff must be at least 2 dx");
  p.cutoff = cutoff;
  const double lc = cutoff / spec.dx();
  p.reach = static_cast<int>(std::floor(lc * (1.0 + 1e-12)));
  require(p.reach <= spec.halo(), ErrorCode::insufficient_halo,
          "cutoff needs halo >= " + std::to_string(p.reach));
  const double lim2 = lc * lc * (1.0 + 1e-12);
  const int R = p.reach, R2 = p.N == 3 ? R : 0;
  for (int a = -R; a <= R; ++a)
    for (int b = -R; b <= R; ++b)
      for (int c = -R2; c <= R2; ++c) {
        const Coord o{a, b, c};
        const double n2 = double(a) * a + double(b) * b + double(c) * c;
        if (n2 > lim2 || !lex_positive(o)) continue;
        p.offsets.push_back(o);
        p.strides.push_back(spec.stride(o));
        p.kernel.push_back(p.c_s / std::pow(std::sqrt(n2) * spec.dx(), p.N + s));
      }
  return p;
}

/// Antisymmetric pair field: z[x * width + j] = z(x, x + p_j) = -z(x + p_j, x).
/// Entries whose partner lies outside the grid are kept at zero.
struct FracDual {
  GridSpec spec;
  std::size_t width = 0;
  std::vector<double> z;

  FracDual() = default;
  FracDual(const GridSpec& s, const FracEnergyParams& p)
      : spec(s), width(p.width()), z(s.size() * p.width(), 0.0) {}

  friend bool operator==(const FracDual&, const FracDual&) = default;
};

/// Visit every in-grid pair (x, y = x + p_j) as fn(xi, yi, j).
template <class Fn>
void for_each_pair(const GridSpec& spec, const FracEnergyParams& p, Fn&& fn) {
  const Coord& e = spec.extent();
  for_each_cell(spec, [&](const Coord& c, std::size_t xi) {
    for (std::size_t j = 0; j < p.width(); ++j) {
      const Coord& o = p.offsets[j];
      const int y0 = c[0] + o[0], y1 = c[1] + o[1], y2 = c[2] + o[2];
      if (y0 < 0 || y0 >= e[0] || y1 < 0 || y1 >= e[1] || y2 < 0 || y2 >= e[2]) continue;
      fn(xi, static_cast<std::size_t>(static_cast<std::ptrdiff_t>(xi) + p.strides[j]), j);
    }
  });
}

namespace detail {
inline void check_grid(const GridSpec& spec, const FracEnergyParams& p) {
  require(spec.ndims() == p.N && spec.dx() == p.dx, ErrorCode::invalid_argument,
          "energy parameters were built for a different grid");
  require(p.reach <= spec.halo(), ErrorCode::insufficient_halo);
  if (!p.offsets.empty())
    require(spec.stride(p.offsets.back()) == p.strides.back(), ErrorCode::invalid_argument,
            "energy parameters were built for a different grid");
}
}  // namespace detail

inline double js_value(const ScalarField& u, const FracEnergyParams& p) {
  detail::check_grid(u.spec(), p);
  double sum = 0.0;
  for_each_pair(u.spec(), p, [&](std::size_t x, std::size_t y, std::size_t j) {
    sum += p.kernel[j] * std::abs(u[x] - u[y]);
  });
  return sum * p.cell_volume * p.cell_volume;
}

inline double perimeter_frac(const SetMask& E, const FracEnergyParams& p) {
  detail::check_grid(E.spec(), p);
  require(!touches_halo(E), ErrorCode::set_touches_boundary);
  double sum = 0.0;
  for_each_pair(E.spec(), p, [&](std::size_t x, std::size_t y, std::size_t j) {
    if (E[x] != E[y]) sum += p.kernel[j];
  });
  return sum * p.cell_volume * p.cell_volume;
}

inline bool frac_dual_feasible(const FracDual& z, double tol = 1e-9) {
  return std::all_of(z.z.begin(), z.z.end(), [&](double v) { return std::abs(v) <= 1.0 + tol; });
}

/// out[x] += coef * sum_j k_j z(x, x+p_j) - coef * sum_j k_j z(x-p_j, x).
inline void frac_adjoint_accumulate(const FracDual& z, const FracEnergyParams& p, double coef,
                                    std::span<double> out) {
  for_each_pair(z.spec, p, [&](std::size_t x, std::size_t y, std::size_t j) {
    const double v = coef * p.kernel[j] * z.z[x * z.width + j];
    out[x] += v;
    out[y] -= v;
  });
}

/// D(x) = -cv * sum_y k(x - y) z(x, y), so that
/// sum_x D(x) phi(x) cv = -sum over pairs of k z(x,y) (phi(x) - phi(y)) cv^2.
inline ScalarField div_s(const FracDual& z, const FracEnergyParams& p) {
  require(z.width == p.width() && z.z.size() == z.spec.size() * p.width(),
          ErrorCode::invalid_argument, "dual does not match energy parameters");
  require(frac_dual_feasible(z), ErrorCode::infeasible_dual);
  ScalarField d(z.spec, 0.0);
  frac_adjoint_accumulate(z, p, -p.cell_volume, d.raw());
  return d;
}

/// sum over stored pairs of k z (u(x) - u(y)) cv^2.
inline double frac_pairing(const ScalarField& u, const FracDual& z, const FracEnergyParams& p) {
  double sum = 0.0;
  for_each_pair(u.spec(), p, [&](std::size_t x, std::size_t y, std::size_t j) {
    sum += p.kernel[j] * z.z[x * z.width + j] * (u[x] - u[y]);
  });
  return sum * p.cell_volume * p.cell_volume;
}

/// z = sign(u(x) - u(y)) with sign(0) = 0.
inline FracDual frac_certificate(const ScalarField& u, const FracEnergyParams& p) {
  FracDual z(u.spec(), p);
  for_each_pair(u.spec(), p, [&](std::size_t x, std::size_t y, std::size_t j) {
    const double d = u[x] - u[y];
    z.z[x * z.width + j] = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
  });
  return z;
}

struct FracDualReport {
  double max_slack = 0.0;
  double weighted_slack = 0.0;       ///< sum k slack cv^2 = js(u) - pairing
  double weighted_mean_slack = 0.0;  ///< weighted_slack / sum k cv^2
  std::size_t bound_violations = 0;
  std::size_t pairs = 0;
  bool pass = false;
};

/// Per-pair slack |u(x) - u(y)| - z(x,y)(u(x) - u(y)).
inline FracDualReport frac_dual_check(const ScalarField& u, const FracDual& z,
                                      const FracEnergyParams& p, double tol) {
  FracDualReport rep;
  double wsum = 0.0;
  for_each_pair(u.spec(), p, [&](std::size_t x, std::size_t y, std::size_t j) {
    const double zz = z.z[x * z.width + j];
    const double d = u[x] - u[y];
    const double slack = std::abs(d) - zz * d;
    if (std::abs(zz) > 1.0 + tol) ++rep.bound_violations;
    rep.max_slack = std::max(rep.max_slack, slack);
    rep.weighted_slack += p.kernel[j] * slack;
    wsum += p.kernel[j];
    ++rep.pairs;
  });
  const double cv2 = p.cell_volume * p.cell_volume;
  rep.weighted_slack *= cv2;
  rep.weighted_mean_slack = wsum > 0.0 ? rep.weighted_slack / (wsum * cv2) : 0.0;
  rep.pass = rep.bound_violations == 0 && rep.weighted_mean_slack <= tol;
  return rep;
}

}  // namespace nlflow
