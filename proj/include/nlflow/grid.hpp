#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nlflow/error.hpp"

namespace nlflow {

using Coord = std::array<int, 3>;

/// Uniform isotropic grid in 2 or 3 dimensions. Unused trailing axes have
/// extent 1 so that all loops can be written three-deep.
class GridSpec {
 public:
  GridSpec() = default;

  GridSpec(std::vector<int> dims, double dx, int halo) : dx_(dx), halo_(halo) {
    require(dims.size() == 2 || dims.size() == 3, ErrorCode::invalid_argument,
            "grid must have 2 or 3 axes");
    ndims_ = static_cast<int>(dims.size());
    for (int a = 0; a < ndims_; ++a) {
      require(dims[a] >= 4, ErrorCode::invalid_argument, "each axis needs at least 4 cells");
      extent_[a] = dims[a];
    }
    require(dx > 0.0 && std::isfinite(dx), ErrorCode::invalid_argument, "dx must be positive");
    require(halo >= 0, ErrorCode::invalid_argument, "halo must be nonnegative");
    const int smallest = *std::min_element(dims.begin(), dims.end());
    require(2 * halo < smallest, ErrorCode::invalid_argument, "halo must be below min(dims)/2");
  }

  int ndims() const { return ndims_; }
  int dim(int axis) const { return extent_[axis]; }
  const Coord& extent() const { return extent_; }
  double dx() const { return dx_; }
  int halo() const { return halo_; }
  double cell_volume() const { return ndims_ == 2 ? dx_ * dx_ : dx_ * dx_ * dx_; }

  std::size_t size() const {
    return static_cast<std::size_t>(extent_[0]) * extent_[1] * extent_[2];
  }

  std::size_t index(const Coord& c) const {
    return (static_cast<std::size_t>(c[0]) * extent_[1] + c[1]) * extent_[2] + c[2];
  }

  Coord coord(std::size_t idx) const {
    Coord c{};
    c[2] = static_cast<int>(idx % extent_[2]);
    idx /= extent_[2];
    c[1] = static_cast<int>(idx % extent_[1]);
    c[0] = static_cast<int>(idx / extent_[1]);
    return c;
  }

  /// Linear stride of a lattice offset.
  std::ptrdiff_t stride(const Coord& off) const {
    return (static_cast<std::ptrdiff_t>(off[0]) * extent_[1] + off[1]) * extent_[2] + off[2];
  }

  bool contains(const Coord& c) const {
    for (int a = 0; a < 3; ++a)
      if (c[a] < 0 || c[a] >= extent_[a]) return false;
    return true;
  }

  /// Cells within `halo` of the grid boundary along any active axis.
  bool in_halo(const Coord& c) const {
    for (int a = 0; a < ndims_; ++a)
      if (c[a] < halo_ || c[a] >= extent_[a] - halo_) return true;
    return false;
  }

  /// Physical position of a cell center; the origin is cell dims/2 on each axis.
  std::array<double, 3> position(const Coord& c) const {
    std::array<double, 3> x{0.0, 0.0, 0.0};
    for (int a = 0; a < ndims_; ++a) x[a] = (c[a] - extent_[a] / 2) * dx_;
    return x;
  }

  Coord origin_cell() const {
    Coord c{0, 0, 0};
    for (int a = 0; a < ndims_; ++a) c[a] = extent_[a] / 2;
    return c;
  }

  double diagonal() const {
    double s = 0.0;
    for (int a = 0; a < ndims_; ++a) s += double(extent_[a]) * extent_[a];
    return std::sqrt(s) * dx_;
  }

  friend bool operator==(const GridSpec& a, const GridSpec& b) {
    return a.ndims_ == b.ndims_ && a.extent_ == b.extent_ && a.dx_ == b.dx_ && a.halo_ == b.halo_;
  }

 private:
  int ndims_ = 2;
  Coord extent_{4, 4, 1};
  double dx_ = 1.0;
  int halo_ = 0;
};

/// Values on every cell of a grid, row-major (axis 0 slowest).
template <class T>
class GridArray {
 public:
  using value_type = T;

  GridArray() = default;
  explicit GridArray(const GridSpec& spec, T fill = T{}) : spec_(spec), values_(spec.size(), fill) {}
  GridArray(const GridSpec& spec, std::vector<T> values) : spec_(spec), values_(std::move(values)) {
    require(values_.size() == spec_.size(), ErrorCode::invalid_argument,
            "value count does not match grid size");
  }

  const GridSpec& spec() const { return spec_; }
  std::size_t size() const { return values_.size(); }

  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }
  T& at(const Coord& c) { return values_[spec_.index(c)]; }
  const T& at(const Coord& c) const { return values_[spec_.index(c)]; }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  std::vector<T>& raw() { return values_; }
  const std::vector<T>& raw() const { return values_; }

  friend bool operator==(const GridArray& a, const GridArray& b) {
    return a.spec_ == b.spec_ && a.values_ == b.values_;
  }

 private:
  GridSpec spec_;
  std::vector<T> values_;
};

using ScalarField = GridArray<double>;
using SetMask = GridArray<std::uint8_t>;

inline bool all_finite(const ScalarField& f) {
  return std::all_of(f.raw().begin(), f.raw().end(), [](double v) { return std::isfinite(v); });
}

inline std::size_t count(const SetMask& m) {
  return static_cast<std::size_t>(std::count_if(m.raw().begin(), m.raw().end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

inline bool empty(const SetMask& m) { return count(m) == 0; }
inline bool full(const SetMask& m) { return count(m) == m.size(); }

inline SetMask complement(const SetMask& m) {
  SetMask out(m.spec());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] ? 0 : 1;
  return out;
}

/// True iff a ⊆ b.
inline bool subset(const SetMask& a, const SetMask& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && !b[i]) return false;
  return true;
}

template <class Fn>
void for_each_cell(const GridSpec& spec, Fn&& fn) {
  const Coord& e = spec.extent();
  std::size_t idx = 0;
  for (int i = 0; i < e[0]; ++i)
    for (int j = 0; j < e[1]; ++j)
      for (int k = 0; k < e[2]; ++k, ++idx) fn(Coord{i, j, k}, idx);
}

/// Mask of the cells within `halo` cells of the grid boundary.
inline SetMask halo_band(const GridSpec& spec) {
  SetMask m(spec);
  for_each_cell(spec, [&](const Coord& c, std::size_t i) { m[i] = spec.in_halo(c) ? 1 : 0; });
  return m;
}

inline bool touches_halo(const SetMask& m) {
  const GridSpec& spec = m.spec();
  bool hit = false;
  for_each_cell(spec, [&](const Coord& c, std::size_t i) {
    if (m[i] && spec.in_halo(c)) hit = true;
  });
  return hit;
}

/// Cells farther than `band` cells (Chebyshev) from the halo region.
inline bool within_guard(const SetMask& m, int band) {
  const GridSpec& spec = m.spec();
  const int lim = spec.halo() + band;
  bool ok = true;
  for_each_cell(spec, [&](const Coord& c, std::size_t i) {
    if (!m[i]) return;
    for (int a = 0; a < spec.ndims(); ++a)
      if (c[a] < lim || c[a] >= spec.dim(a) - lim) ok = false;
  });
  return ok;
}

/// Lattice ball {p : |p|·dx ≤ radius} in lexicographic order of offsets.
struct BallStencil {
  double radius = 0.0;
  double radius_cells = 0.0;
  int reach = 0;  ///< max |p_a| over the stencil
  std::vector<Coord> offsets;
  std::vector<std::ptrdiff_t> strides;  ///< linear strides on the grid it was built for

  std::size_t size() const { return offsets.size(); }
};

inline BallStencil ball_offsets(const GridSpec& spec, double radius, bool windowed = true) {
  require(radius >= 0.0 && std::isfinite(radius), ErrorCode::invalid_argument,
          "radius must be nonnegative");
  BallStencil st;
  st.radius = radius;
  st.radius_cells = radius / spec.dx();
  // The relative slack keeps exact lattice distances (e.g. radius 5 for (3,4)) inside.
  const double lim2 = st.radius_cells * st.radius_cells * (1.0 + 1e-12);
  st.reach = static_cast<int>(std::floor(st.radius_cells * (1.0 + 1e-12)));
  if (windowed)
    require(st.reach + 1 <= spec.halo(), ErrorCode::stencil_exceeds_halo,
            "radius " + std::to_string(radius) + " needs halo >= " + std::to_string(st.reach + 1));
  const int R = st.reach;
  const int R2 = spec.ndims() == 3 ? R : 0;
  for (int a = -R; a <= R; ++a)
    for (int b = -R; b <= R; ++b)
      for (int c = -R2; c <= R2; ++c) {
        const double n2 = double(a) * a + double(b) * b + double(c) * c;
        if (n2 <= lim2) st.offsets.push_back({a, b, c});
      }
  st.strides.reserve(st.offsets.size());
  for (const Coord& o : st.offsets) st.strides.push_back(spec.stride(o));
  return st;
}

/// Window centers whose whole stencil lies inside the grid: [reach, dim-reach)
/// on every active axis.
struct WindowBox {
  Coord lo{0, 0, 0};
  Coord hi{1, 1, 1};  ///< exclusive

  std::size_t count() const {
    std::size_t n = 1;
    for (int a = 0; a < 3; ++a) n *= static_cast<std::size_t>(std::max(0, hi[a] - lo[a]));
    return n;
  }

  template <class Fn>
  void for_each(const GridSpec& spec, Fn&& fn) const {
    std::size_t w = 0;
    for (int i = lo[0]; i < hi[0]; ++i)
      for (int j = lo[1]; j < hi[1]; ++j)
        for (int k = lo[2]; k < hi[2]; ++k, ++w) fn(w, spec.index(Coord{i, j, k}), Coord{i, j, k});
  }

  bool contains(const Coord& c) const {
    for (int a = 0; a < 3; ++a)
      if (c[a] < lo[a] || c[a] >= hi[a]) return false;
    return true;
  }

  /// Window ordinal of a center known to be inside the box.
  std::size_t ordinal(const Coord& c) const {
    return (static_cast<std::size_t>(c[0] - lo[0]) * (hi[1] - lo[1]) + (c[1] - lo[1])) *
               (hi[2] - lo[2]) +
           (c[2] - lo[2]);
  }
};

inline WindowBox window_box(const GridSpec& spec, int reach) {
  WindowBox box;
  for (int a = 0; a < spec.ndims(); ++a) {
    box.lo[a] = reach;
    box.hi[a] = spec.dim(a) - reach;
  }
  return box;
}

struct WindowExtrema {
  double min = 0.0;
  double max = 0.0;
  Coord argmin{0, 0, 0};
  Coord argmax{0, 0, 0};
};

/// Extrema of u over the stencil centered at w. Ties go to the first offset
/// in lexicographic order.
inline WindowExtrema window_extrema(const ScalarField& u, const BallStencil& st, const Coord& w) {
  const GridSpec& spec = u.spec();
  for (const Coord& o : st.offsets) {
    const Coord c{w[0] + o[0], w[1] + o[1], w[2] + o[2]};
    require(spec.contains(c), ErrorCode::window_out_of_bounds);
  }
  const std::size_t base = spec.index(w);
  WindowExtrema ex;
  ex.min = ex.max = u[base + st.strides[0]];
  ex.argmin = ex.argmax = st.offsets[0];
  for (std::size_t i = 1; i < st.size(); ++i) {
    const double v = u[base + st.strides[i]];
    if (v < ex.min) {
      ex.min = v;
      ex.argmin = st.offsets[i];
    }
    if (v > ex.max) {
      ex.max = v;
      ex.argmax = st.offsets[i];
    }
  }
  return ex;
}

/// Max - min over the stencil at linear center index; no bounds checks.
inline double window_osc(std::span<const double> u, const BallStencil& st, std::size_t center) {
  double lo = u[center + st.strides[0]], hi = lo;
  for (std::size_t i = 1; i < st.strides.size(); ++i) {
    const double v = u[center + st.strides[i]];
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return hi - lo;
}

/// {u <= t}.
inline SetMask sublevel(const ScalarField& u, double t) {
  SetMask m(u.spec());
  for (std::size_t i = 0; i < u.size(); ++i) m[i] = u[i] <= t ? 1 : 0;
  return m;
}

inline ScalarField indicator(const SetMask& m) {
  ScalarField f(m.spec());
  for (std::size_t i = 0; i < m.size(); ++i) f[i] = m[i] ? 1.0 : 0.0;
  return f;
}

}  // namespace nlflow
