#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "nlflow/error.hpp"
#include "nlflow/grid.hpp"
#include "nlflow/parallel.hpp"

namespace nlflow {

namespace detail {

/// Lower envelope of parabolas: out[q] = min_p (q - p)^2 + f[p] over finite f[p].
inline void edt_1d(const std::vector<double>& f, std::vector<double>& out, std::vector<int>& v,
                   std::vector<double>& zb) {
  const int n = static_cast<int>(f.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  v.assign(n, 0);
  zb.assign(n + 1, 0.0);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (!std::isfinite(f[q])) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      zb[0] = -inf;
      zb[1] = inf;
      continue;
    }
    double s;
    for (;;) {  // zb[0] = -inf stops the pops at k = 0
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s > zb[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    zb[k] = s;
    zb[k + 1] = inf;
  }
  out.assign(n, inf);
  if (k < 0) return;
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (zb[j + 1] < q) ++j;
    const double d = q - v[j];
    out[q] = d * d + f[v[j]];
  }
}

}  // namespace detail

/// Squared Euclidean distance (length units) from each cell center to the
/// nearest center with target[cell] != 0; +inf when there is none.
inline ScalarField squared_distance_to(const SetMask& target) {
  const GridSpec& spec = target.spec();
  constexpr double inf = std::numeric_limits<double>::infinity();
  ScalarField d(spec, inf);
  for (std::size_t i = 0; i < target.size(); ++i)
    if (target[i]) d[i] = 0.0;
  std::vector<double> line, out, zb;
  std::vector<int> v;
  const Coord& e = spec.extent();
  for (int axis = 0; axis < spec.ndims(); ++axis) {
    const int n = e[axis];
    Coord step{0, 0, 0};
    step[axis] = 1;
    const std::ptrdiff_t stride = spec.stride(step);
    for_each_cell(spec, [&](const Coord& c, std::size_t base) {
      if (c[axis] != 0) return;
      line.resize(n);
      for (int q = 0; q < n; ++q) line[q] = d[base + q * stride];
      detail::edt_1d(line, out, v, zb);
      for (int q = 0; q < n; ++q) d[base + q * stride] = out[q];
    });
  }
  const double dx2 = spec.dx() * spec.dx();
  for (double& x : d.raw())
    if (std::isfinite(x)) x *= dx2;
  return d;
}

/// Euclidean distance to the nearest member center; +inf if target is empty.
inline ScalarField distance_to(const SetMask& target) {
  ScalarField d = squared_distance_to(target);
  for (double& x : d.raw()) x = std::sqrt(x);
  return d;
}

enum class PhaseState { mixed, empty, full };

struct SignedDistanceField {
  ScalarField d;
  SetMask source;
  PhaseState state = PhaseState::mixed;
  double calibration = 0.0;
};

/// Negative inside, positive outside. Magnitude is the distance to the nearest
/// opposite-phase center minus `calibration` (default dx/2), so the zero level
/// sits between the phases. Empty and full sets map to +D_max and -D_max.
inline SignedDistanceField signed_distance(const SetMask& E, double calibration = -1.0) {
  const GridSpec& spec = E.spec();
  SignedDistanceField out;
  out.source = E;
  out.calibration = calibration < 0.0 ? 0.5 * spec.dx() : calibration;
  require(out.calibration < spec.dx(), ErrorCode::invalid_argument,
          "calibration must be below dx");
  const std::size_t members = count(E);
  const double dmax = spec.diagonal();
  if (members == 0 || members == E.size()) {
    out.state = members == 0 ? PhaseState::empty : PhaseState::full;
    out.d = ScalarField(spec, members == 0 ? dmax : -dmax);
    return out;
  }
  const ScalarField to_in = squared_distance_to(E);
  const ScalarField to_out = squared_distance_to(complement(E));
  out.d = ScalarField(spec);
  for (std::size_t i = 0; i < E.size(); ++i)
    out.d[i] = E[i] ? -(std::sqrt(to_out[i]) - out.calibration)
                    : std::sqrt(to_in[i]) - out.calibration;
  return out;
}

/// 2D signed distance to the piecewise-linear zero contour of a sampled
/// field (marching squares on cell centers, linear interpolation along
/// edges). The sign follows {u <= level}, so the zero set of the result
/// bounds exactly the mask sublevel(u, level). Exhaustive over segments.
inline SignedDistanceField subcell_signed_distance(const ScalarField& u, double level = 0.0) {
  const GridSpec& spec = u.spec();
  require(spec.ndims() == 2, ErrorCode::invalid_argument, "sub-cell distance is 2D only");
  SignedDistanceField out;
  out.source = SetMask(spec);
  for (std::size_t i = 0; i < u.size(); ++i) out.source[i] = u[i] <= level ? 1 : 0;
  const std::size_t members = count(out.source);
  const double dmax = spec.diagonal();
  if (members == 0 || members == u.size()) {
    out.state = members == 0 ? PhaseState::empty : PhaseState::full;
    out.d = ScalarField(spec, members == 0 ? dmax : -dmax);
    return out;
  }
  struct Segment {
    double ax, ay, bx, by;
  };
  std::vector<Segment> segs;
  const int n0 = spec.dim(0), n1 = spec.dim(1);
  auto val = [&](int i, int j) { return u[spec.index({i, j, 0})] - level; };
  static constexpr int cx[4] = {0, 1, 1, 0}, cy[4] = {0, 0, 1, 1};
  for (int i = 0; i + 1 < n0; ++i)
    for (int j = 0; j + 1 < n1; ++j) {
      const double c[4] = {val(i, j), val(i + 1, j), val(i + 1, j + 1), val(i, j + 1)};
      double px[4], py[4];
      int np = 0;
      for (int e = 0; e < 4; ++e) {
        const int a = e, b = (e + 1) % 4;
        if ((c[a] <= 0.0) == (c[b] <= 0.0)) continue;
        const double t = c[a] / (c[a] - c[b]);
        px[np] = i + cx[a] + t * (cx[b] - cx[a]);
        py[np] = j + cy[a] + t * (cy[b] - cy[a]);
        ++np;
      }
      if (np == 2) {
        segs.push_back({px[0], py[0], px[1], py[1]});
      } else if (np == 4) {
        // Saddle: isolate corners 1 and 3 when the center agrees with corner 0.
        const bool center_in = 0.25 * (c[0] + c[1] + c[2] + c[3]) <= 0.0;
        if (center_in == (c[0] <= 0.0)) {
          segs.push_back({px[0], py[0], px[1], py[1]});
          segs.push_back({px[2], py[2], px[3], py[3]});
        } else {
          segs.push_back({px[1], py[1], px[2], py[2]});
          segs.push_back({px[3], py[3], px[0], py[0]});
        }
      }
    }
  out.d = ScalarField(spec);
  const double dx = spec.dx();
  parallel_for(u.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const Coord p = spec.coord(k);
      const double x = p[0], y = p[1];
      double best = std::numeric_limits<double>::infinity();
      for (const Segment& sg : segs) {
        const double vx = sg.bx - sg.ax, vy = sg.by - sg.ay;
        const double len2 = vx * vx + vy * vy;
        double t = len2 > 0.0 ? ((x - sg.ax) * vx + (y - sg.ay) * vy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const double ex = sg.ax + t * vx - x, ey = sg.ay + t * vy - y;
        best = std::min(best, ex * ex + ey * ey);
      }
      const double d = std::sqrt(best) * dx;
      out.d[k] = out.source[k] ? -d : d;
    }
  }, 256);
  out.calibration = 0.0;
  return out;
}

}  // namespace nlflow
