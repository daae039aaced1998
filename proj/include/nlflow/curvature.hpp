#pragma once

// Pointwise nonlocal curvatures: the Minkowski curvature on smooth probes and
// the fractional curvature by principal-value quadrature, either on a probe
// (polar rays, antipodal pairs) or on a mask (lattice sum about a face).

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <utility>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/quadrature/trapezoidal.hpp>
#include <boost/math/tools/minima.hpp>

#include "nlflow/error.hpp"
#include "nlflow/frac_energy.hpp"
#include "nlflow/grid.hpp"

namespace nlflow {

using Vec3 = std::array<double, 3>;

namespace detail {

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 axpy(double t, const Vec3& v, const Vec3& x) {
  return {x[0] + t * v[0], x[1] + t * v[1], x[2] + t * v[2]};
}

}  // namespace detail

enum class ProbeKind { ball, half_space, ellipse };

/// Convex smooth set with an exact distance function, normal and principal
/// curvatures. Ellipses are 2D and axis-aligned.
class SmoothSetProbe {
 public:
  static SmoothSetProbe ball(int N, double R, Vec3 center = {0, 0, 0}) {
    require(N == 2 || N == 3, ErrorCode::invalid_argument, "N must be 2 or 3");
    require(R > 0.0, ErrorCode::invalid_argument, "radius must be positive");
    SmoothSetProbe p(ProbeKind::ball, N);
    p.center_ = center;
    p.axes_ = {R, R, R};
    return p;
  }

  /// {x : x.n <= offset} with unit outward normal n.
  static SmoothSetProbe half_space(int N, Vec3 normal, double offset = 0.0) {
    require(N == 2 || N == 3, ErrorCode::invalid_argument, "N must be 2 or 3");
    if (N == 2) normal[2] = 0.0;
    const double n = detail::norm(normal);
    require(n > 0.0, ErrorCode::invalid_argument, "normal must be nonzero");
    SmoothSetProbe p(ProbeKind::half_space, N);
    p.normal_ = {normal[0] / n, normal[1] / n, normal[2] / n};
    p.offset_ = offset;
    return p;
  }

  static SmoothSetProbe ellipse(double a, double b, Vec3 center = {0, 0, 0}) {
    require(a > 0.0 && b > 0.0, ErrorCode::invalid_argument, "semi-axes must be positive");
    SmoothSetProbe p(ProbeKind::ellipse, 2);
    p.center_ = center;
    p.axes_ = {a, b, 1.0};
    return p;
  }

  ProbeKind kind() const { return kind_; }
  int ndims() const { return N_; }

  /// Characteristic length used to scale tolerances.
  double scale() const { return kind_ == ProbeKind::half_space ? 1.0 : std::max(axes_[0], axes_[1]); }

  bool inside(const Vec3& y) const {
    const Vec3 z = local(y);
    switch (kind_) {
      case ProbeKind::ball: return detail::dot(z, z) <= axes_[0] * axes_[0];
      case ProbeKind::half_space: return detail::dot(y, normal_) <= offset_;
      case ProbeKind::ellipse: {
        const double u = z[0] / axes_[0], v = z[1] / axes_[1];
        return u * u + v * v <= 1.0;
      }
    }
    return false;
  }

  /// Signed distance to the boundary, negative inside.
  double level(const Vec3& y) const {
    switch (kind_) {
      case ProbeKind::ball: return detail::norm(local(y)) - axes_[0];
      case ProbeKind::half_space: return detail::dot(y, normal_) - offset_;
      case ProbeKind::ellipse: {
        const double d = ellipse_distance(local(y));
        return inside(y) ? -d : d;
      }
    }
    return 0.0;
  }

  double boundary_distance(const Vec3& y) const { return std::abs(level(y)); }

  /// Cheap distance-scaled residual of the implicit equation, for on-boundary checks.
  double boundary_residual(const Vec3& y) const {
    if (kind_ != ProbeKind::ellipse) return std::abs(level(y));
    const Vec3 z = local(y);
    const double u = z[0] / axes_[0], v = z[1] / axes_[1];
    return 0.5 * std::abs(u * u + v * v - 1.0) * std::min(axes_[0], axes_[1]);
  }

  /// Point of the boundary in direction theta (azimuth, plus polar angle phi in 3D).
  Vec3 boundary_point(double theta, double phi = std::numbers::pi / 2) const {
    if (kind_ == ProbeKind::half_space) {
      return {offset_ * normal_[0], offset_ * normal_[1], offset_ * normal_[2]};
    }
    const double st = std::sin(phi);
    Vec3 z{axes_[0] * std::cos(theta) * st, axes_[1] * std::sin(theta) * st, 0.0};
    if (N_ == 3) z[2] = axes_[2] * std::cos(phi);
    return {z[0] + center_[0], z[1] + center_[1], z[2] + center_[2]};
  }

  /// Outward unit normal at a boundary point.
  Vec3 normal(const Vec3& x) const {
    if (kind_ == ProbeKind::half_space) return normal_;
    const Vec3 z = local(x);
    Vec3 g{z[0] / (axes_[0] * axes_[0]), z[1] / (axes_[1] * axes_[1]),
           N_ == 3 ? z[2] / (axes_[2] * axes_[2]) : 0.0};
    const double n = detail::norm(g);
    return {g[0] / n, g[1] / n, g[2] / n};
  }

  /// Principal curvatures at a boundary point (positive for convex sets).
  std::array<double, 2> principal_curvatures(const Vec3& x) const {
    switch (kind_) {
      case ProbeKind::ball: return {1.0 / axes_[0], N_ == 3 ? 1.0 / axes_[0] : 0.0};
      case ProbeKind::half_space: return {0.0, 0.0};
      case ProbeKind::ellipse: {
        const Vec3 z = local(x);
        const double a = axes_[0], b = axes_[1];
        const double c = z[0] / a, s = z[1] / b;
        const double q = a * a * s * s + b * b * c * c;
        return {a * b / (q * std::sqrt(q)), 0.0};
      }
    }
    return {0.0, 0.0};
  }

  /// Length of the chord {x + t w : t > 0} inside the set, for x on the
  /// boundary: 0 when the ray leaves at once, +inf when it never leaves.
  double chord(const Vec3& x, const Vec3& w) const {
    if (kind_ == ProbeKind::half_space) {
      return detail::dot(w, normal_) < 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    const Vec3 z = local(x);
    double xa = 0.0, wa = 0.0;
    for (int k = 0; k < N_; ++k) {
      const double inv = 1.0 / (axes_[k] * axes_[k]);
      xa += z[k] * w[k] * inv;
      wa += w[k] * w[k] * inv;
    }
    return std::max(0.0, -2.0 * xa / wa);
  }

 private:
  SmoothSetProbe(ProbeKind k, int N) : kind_(k), N_(N) {}

  Vec3 local(const Vec3& y) const {
    Vec3 z{y[0] - center_[0], y[1] - center_[1], y[2] - center_[2]};
    if (N_ == 2) z[2] = 0.0;
    return z;
  }

  // Distance from z to the ellipse: coarse angular scan, then Brent refinement.
  double ellipse_distance(const Vec3& z) const {
    const double a = axes_[0], b = axes_[1];
    auto dist2 = [&](double t) {
      const double dx = z[0] - a * std::cos(t), dy = z[1] - b * std::sin(t);
      return dx * dx + dy * dy;
    };
    constexpr int samples = 720;
    const double step = 2.0 * std::numbers::pi / samples;
    int best = 0;
    double bestv = dist2(0.0);
    for (int i = 1; i < samples; ++i) {
      const double v = dist2(i * step);
      if (v < bestv) {
        bestv = v;
        best = i;
      }
    }
    const auto r = boost::math::tools::brent_find_minima(dist2, (best - 1) * step, (best + 1) * step, 50);
    return std::sqrt(std::min(bestv, r.second));
  }

  ProbeKind kind_;
  int N_;
  Vec3 center_{0, 0, 0};
  Vec3 axes_{1, 1, 1};
  Vec3 normal_{1, 0, 0};
  double offset_ = 0.0;
};

struct CurvatureResult {
  double value = 0.0;
  bool defined = true;
  // Minkowski branches.
  double outer = 0.0;
  double inner = 0.0;
  bool outer_live = false;
  bool inner_live = false;
  bool degenerate = false;
  // Fractional quadrature.
  double error_estimate = 0.0;
  double tail = 0.0;

  double total() const { return value + tail; }

  std::string branches() const {
    if (degenerate) return "degenerate";
    if (outer_live && inner_live) return "both";
    if (outer_live) return "outer";
    if (inner_live) return "inner";
    return "none";
  }
};

namespace detail {

inline void require_on_boundary(const SmoothSetProbe& probe, const Vec3& x) {
  require(probe.boundary_residual(x) <= 1e-9 * probe.scale(), ErrorCode::not_a_boundary_probe,
          "point is not on the probe boundary");
}

/// Whether dist(x + sign*rho*nu, boundary) equals rho within 1e-6 rho.
inline bool distance_condition(const SmoothSetProbe& probe, const Vec3& x, const Vec3& nu, double sign,
                               double rho) {
  const double d = probe.boundary_distance(axpy(sign * rho, nu, x));
  return std::abs(d - rho) <= 1e-6 * rho;
}

}  // namespace detail

/// Minkowski curvature K_r = K_r^+ + K_r^-, with
/// K_r^{+/-} = +/- (1/2r) prod(1 +/- r kappa_i), each branch kept only when the
/// ball of radius r on that side touches the boundary at x alone.
inline CurvatureResult minkowski_curvature(const SmoothSetProbe& probe, const Vec3& x, double r) {
  require(r > 0.0, ErrorCode::invalid_argument, "r must be positive");
  detail::require_on_boundary(probe, x);
  const Vec3 nu = probe.normal(x);
  const auto k = probe.principal_curvatures(x);
  const int m = probe.ndims() - 1;
  double plus = 1.0, minus = 1.0;
  for (int i = 0; i < m; ++i) {
    plus *= 1.0 + r * k[i];
    minus *= 1.0 - r * k[i];
  }
  CurvatureResult res;
  constexpr double band = 1e-5;
  for (double sign : {1.0, -1.0}) {
    const bool live = detail::distance_condition(probe, x, nu, sign, r);
    const bool below = detail::distance_condition(probe, x, nu, sign, r * (1.0 - band));
    const bool above = detail::distance_condition(probe, x, nu, sign, r * (1.0 + band));
    if (below != above) res.degenerate = true;
    if (sign > 0) {
      res.outer_live = live;
      res.outer = live ? plus / (2.0 * r) : 0.0;
    } else {
      res.inner_live = live;
      res.inner = live ? -minus / (2.0 * r) : 0.0;
    }
  }
  if (res.degenerate) {
    res.defined = false;
    res.value = std::numeric_limits<double>::quiet_NaN();
  } else {
    res.value = res.outer + res.inner;
  }
  return res;
}

/// Unit sphere area |S^{N-1}|.
inline double sphere_area(int N) { return N == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi; }

/// Exact far-field contribution c_s |S^{N-1}| L^{-s} / s of the complement
/// beyond the cutoff, valid once the set lies inside the cutoff ball.
inline double frac_tail_estimate(int N, double s, double cutoff) {
  if (!std::isfinite(cutoff)) return 0.0;
  return cs_constant(N, s) * sphere_area(N) * std::pow(cutoff, -s) / s;
}

/// Fractional curvature of a convex probe by polar-ray quadrature. Each
/// direction w pointing into the set is paired with -w; the paired radial
/// integrand vanishes on the chord and equals 2 beyond it, so the radial
/// integral is exact and only the angular one is numerical.
inline CurvatureResult frac_curvature(const SmoothSetProbe& probe, const Vec3& x, double s,
                                      double cutoff = std::numeric_limits<double>::infinity(),
                                      double tol = 1e-10) {
  require(s > 0.0 && s < 1.0, ErrorCode::invalid_argument, "s must lie in (0,1)");
  require(cutoff > 0.0, ErrorCode::invalid_argument, "cutoff must be positive");
  detail::require_on_boundary(probe, x);
  const int N = probe.ndims();
  const double cs = cs_constant(N, s);
  const double Ls = std::isfinite(cutoff) ? std::pow(cutoff, -s) : 0.0;
  const Vec3 nu = probe.normal(x);
  auto radial = [&](const Vec3& w) {
    const double l = probe.chord(x, w);
    if (!(l < cutoff) || l < 1e-200) return 0.0;
    return 2.0 * (std::pow(l, -s) - Ls) / s;
  };

  boost::math::quadrature::tanh_sinh<double> ts;
  double err = 0.0, Q = 0.0;
  const double half_pi = std::numbers::pi / 2;
  if (N == 2) {
    const Vec3 tau{-nu[1], nu[0], 0.0};
    // The second argument is the distance to the nearer endpoint, which keeps
    // cos(th) accurate where the chord degenerates.
    auto f = [&](double th, double xc) {
      const double c = std::abs(xc) < 0.5 ? std::sin(std::abs(xc)) : std::cos(th);
      const double sn = std::sin(th);
      return radial({-c * nu[0] + sn * tau[0], -c * nu[1] + sn * tau[1], 0.0});
    };
    Q = ts.integrate(f, -half_pi, half_pi, tol, &err);
  } else {
    Vec3 e1 = std::abs(nu[0]) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    const double p = detail::dot(e1, nu);
    e1 = detail::axpy(-p, nu, e1);
    const double n1 = detail::norm(e1);
    e1 = {e1[0] / n1, e1[1] / n1, e1[2] / n1};
    const Vec3 e2{nu[1] * e1[2] - nu[2] * e1[1], nu[2] * e1[0] - nu[0] * e1[2],
                  nu[0] * e1[1] - nu[1] * e1[0]};
    double inner_err = 0.0;
    auto f = [&](double th, double xc) {
      const double c = th > 1.0 ? std::sin(std::abs(xc)) : std::cos(th);
      const double sn = std::sin(th);
      auto g = [&](double ph) {
        const double cp = std::cos(ph), sp = std::sin(ph);
        Vec3 w;
        for (int a = 0; a < 3; ++a) w[a] = -c * nu[a] + sn * (cp * e1[a] + sp * e2[a]);
        return radial(w);
      };
      double e = 0.0;
      const double v = boost::math::quadrature::trapezoidal(g, 0.0, 2.0 * std::numbers::pi, tol, 12,
                                                            &e);
      inner_err = std::max(inner_err, e);
      return v * sn;
    };
    Q = ts.integrate(f, 0.0, half_pi, tol, &err);
    err += inner_err;
  }
  require(std::isfinite(Q), ErrorCode::quadrature_failure, "non-finite curvature integral");
  CurvatureResult res;
  res.value = cs * Q;
  res.error_estimate = cs * err;
  res.tail = std::isfinite(cutoff) ? frac_tail_estimate(N, s, cutoff) : 0.0;
  return res;
}

/// Probe quadrature with the energy's exponent and cutoff.
inline CurvatureResult frac_curvature(const SmoothSetProbe& probe, const Vec3& x, const FracEnergyParams& p) {
  require(probe.ndims() == p.N, ErrorCode::mismatched_problems, "probe and energy dimensions differ");
  return frac_curvature(probe, x, p.s, p.cutoff);
}

/// Lattice face between `cell` and `cell + dir * e_axis`.
struct BoundaryFace {
  Coord cell{0, 0, 0};
  int axis = 0;
  int dir = 1;

  Coord neighbor() const {
    Coord q = cell;
    q[axis] += dir;
    return q;
  }
};

/// First face met walking from `start` along +/- axis where membership flips.
inline BoundaryFace find_boundary_face(const SetMask& E, Coord start, int axis, int dir) {
  const GridSpec& spec = E.spec();
  require(spec.contains(start), ErrorCode::invalid_argument, "start cell outside the grid");
  Coord c = start;
  while (true) {
    Coord q = c;
    q[axis] += dir;
    require(spec.contains(q), ErrorCode::not_a_boundary_probe, "no boundary along the walk");
    if ((E[spec.index(c)] != 0) != (E[spec.index(q)] != 0)) return {c, axis, dir};
    c = q;
  }
}

/// Fractional curvature of a mask at a face midpoint x:
/// c_s sum_y (chi_{E^c} - chi_E)(y) |x - y|^{-N-s} dx^N over 0 < |x - y| <= L.
/// Cell centers are symmetric about x, so opposite offsets are summed as
/// pairs before accumulation. The error estimate is the uncancelled
/// near-field (|x - y| <= 3 dx) part; the tail is reported separately.
inline CurvatureResult frac_curvature(const SetMask& E, const BoundaryFace& face, const FracEnergyParams& p) {
  const GridSpec& spec = E.spec();
  require(spec.ndims() == p.N, ErrorCode::mismatched_problems, "mask and energy dimensions differ");
  const Coord q = face.neighbor();
  require(spec.contains(face.cell) && spec.contains(q), ErrorCode::not_a_boundary_probe,
          "face outside the grid");
  require((E[spec.index(face.cell)] != 0) != (E[spec.index(q)] != 0), ErrorCode::not_a_boundary_probe,
          "face does not separate the set from its complement");
  const double dx = spec.dx();
  const double Lc = p.cutoff / dx;
  const int reach = static_cast<int>(std::ceil(Lc + 0.5));
  // Twice the face midpoint in cell units.
  Coord two_x{2 * face.cell[0], 2 * face.cell[1], 2 * face.cell[2]};
  two_x[face.axis] += face.dir;
  Coord lo{0, 0, 0}, hi{0, 0, 0};
  for (int a = 0; a < spec.ndims(); ++a) {
    lo[a] = face.cell[a] - reach - 1;
    hi[a] = face.cell[a] + reach + 1;
    require(lo[a] >= 0 && hi[a] < spec.dim(a), ErrorCode::domain_too_small,
            "quadrature radius does not fit the grid");
  }
  auto sigma = [&](const Coord& c) { return E[spec.index(c)] ? -1.0 : 1.0; };
  const double lim2 = 4.0 * Lc * Lc * (1.0 + 1e-12);
  const double expo = -0.5 * (p.N + p.s);
  double sum = 0.0, near = 0.0;
  const int z0 = spec.ndims() == 3 ? lo[2] : 0, z1 = spec.ndims() == 3 ? hi[2] : 0;
  for (int i = lo[0]; i <= hi[0]; ++i)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int k = z0; k <= z1; ++k) {
        const Coord c{i, j, k};
        // Keep the half on the neighbor side of the face.
        if ((2 * c[face.axis] - two_x[face.axis]) * face.dir <= 0) continue;
        double d2 = 0.0;  // |2(c - x)|^2 in cell units
        for (int a = 0; a < spec.ndims(); ++a) {
          const double v = 2.0 * c[a] - two_x[a];
          d2 += v * v;
        }
        if (d2 > lim2) continue;
        Coord m{two_x[0] - i, two_x[1] - j, spec.ndims() == 3 ? two_x[2] - k : 0};
        const double w = std::pow(0.25 * d2, expo);
        const double term = (sigma(c) + sigma(m)) * w;
        sum += term;
        if (d2 <= 36.0) near += std::abs(term);
      }
  const double scale = p.c_s * std::pow(dx, -p.s);
  CurvatureResult res;
  res.value = scale * sum;
  res.error_estimate = scale * near;
  res.tail = frac_tail_estimate(p.N, p.s, p.cutoff);
  return res;
}

/// Mean of the face curvature over every boundary face of the mask. Single
/// faces are dominated by the local stair-casing; the mean is the first
/// variation of the perimeter per unit boundary and tracks the smooth value.
/// The error estimate is the mean near-field asymmetry.
inline CurvatureResult frac_curvature_boundary_mean(const SetMask& E, const FracEnergyParams& p) {
  const GridSpec& spec = E.spec();
  double sum = 0.0, asym = 0.0, tail = 0.0;
  std::size_t faces = 0;
  for_each_cell(spec, [&](const Coord& c, std::size_t i) {
    if (!E[i]) return;
    for (int a = 0; a < spec.ndims(); ++a)
      for (int d : {-1, 1}) {
        Coord q = c;
        q[a] += d;
        if (spec.contains(q) && E[spec.index(q)]) continue;
        const CurvatureResult r = frac_curvature(E, BoundaryFace{c, a, d}, p);
        sum += r.value;
        asym += r.error_estimate;
        tail = r.tail;
        ++faces;
      }
  });
  require(faces > 0, ErrorCode::not_a_boundary_probe, "mask has no boundary");
  CurvatureResult res;
  res.value = sum / double(faces);
  res.error_estimate = asym / double(faces);
  res.tail = tail;
  return res;
}

/// C(N,s) = fractional curvature of the unit ball, by full-space quadrature
/// at two tolerances; computed once per (N, s).
inline double ball_constant(int N, double s) {
  static std::mutex mu;
  static std::map<std::pair<int, double>, double> cache;
  std::lock_guard<std::mutex> lock(mu);
  if (auto it = cache.find({N, s}); it != cache.end()) return it->second;
  const SmoothSetProbe ball = SmoothSetProbe::ball(N, 1.0);
  const Vec3 x = ball.boundary_point(0.0);
  const double inf = std::numeric_limits<double>::infinity();
  const double coarse = frac_curvature(ball, x, s, inf, 1e-7).value;
  const double fine = frac_curvature(ball, x, s, inf, 1e-12).value;
  require(std::abs(fine - coarse) <= 1e-6 * std::abs(fine), ErrorCode::quadrature_failure,
          "ball constant refinement trace: " + std::to_string(coarse) + " -> " + std::to_string(fine));
  cache[{N, s}] = fine;
  return fine;
}

}  // namespace nlflow
