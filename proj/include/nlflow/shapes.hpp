#pragma once

// Built-in initial data. Descriptors look like "disk:R=8" or
// "two-disks:R=6,sep=4"; positions are relative to the grid origin.

#include <cmath>
#include <map>
#include <string>
#include <string_view>

#include "nlflow/distance.hpp"
#include "nlflow/error.hpp"
#include "nlflow/grid.hpp"
#include "nlflow/rng.hpp"

namespace nlflow {

struct ShapeDescriptor {
  std::string name;
  std::map<std::string, double> params;

  double get(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }
  double need(const std::string& key) const {
    auto it = params.find(key);
    require(it != params.end(), ErrorCode::parse_error, "shape '" + name + "' needs " + key);
    return it->second;
  }
};

inline ShapeDescriptor parse_shape(std::string_view text) {
  ShapeDescriptor d;
  const auto colon = text.find(':');
  d.name = std::string(text.substr(0, colon));
  require(!d.name.empty(), ErrorCode::parse_error, "empty shape name");
  if (colon == std::string_view::npos) return d;
  std::string_view rest = text.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    const auto eq = item.find('=');
    require(eq != std::string_view::npos && eq > 0, ErrorCode::parse_error,
            "expected key=value in '" + std::string(item) + "'");
    const std::string key(item.substr(0, eq)), val(item.substr(eq + 1));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(val, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == val.size() && !val.empty(), ErrorCode::parse_error,
            "bad number '" + val + "' for " + key);
    d.params[key] = v;
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return d;
}

/// Closed ball {|x - c| <= R} of cell centers (a disk in 2D).
inline SetMask disk_mask(const GridSpec& spec, double R, std::array<double, 3> c = {0, 0, 0}) {
  SetMask m(spec);
  for_each_cell(spec, [&](const Coord& p, std::size_t i) {
    const auto x = spec.position(p);
    double d2 = 0.0;
    for (int a = 0; a < spec.ndims(); ++a) d2 += (x[a] - c[a]) * (x[a] - c[a]);
    m[i] = d2 <= R * R * (1.0 + 1e-12) ? 1 : 0;
  });
  return m;
}

inline SetMask shape_mask(const GridSpec& spec, const ShapeDescriptor& d) {
  const std::array<double, 3> c{d.get("cx", 0.0), d.get("cy", 0.0), d.get("cz", 0.0)};
  if (d.name == "disk" || d.name == "ball") return disk_mask(spec, d.need("R"), c);
  if (d.name == "square") {
    const double half = 0.5 * d.need("L");
    SetMask m(spec);
    for_each_cell(spec, [&](const Coord& p, std::size_t i) {
      const auto x = spec.position(p);
      bool in = true;
      for (int a = 0; a < spec.ndims(); ++a) in = in && std::abs(x[a] - c[a]) <= half;
      m[i] = in ? 1 : 0;
    });
    return m;
  }
  if (d.name == "annulus") {
    const SetMask outer = disk_mask(spec, d.need("R2"), c);
    const SetMask inner = disk_mask(spec, d.need("R1"), c);
    SetMask m(spec);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = outer[i] && !inner[i] ? 1 : 0;
    return m;
  }
  if (d.name == "two-disks") {
    const double R = d.need("R"), sep = d.get("sep", 2.0 * spec.dx());
    const double off = R + 0.5 * sep;
    const SetMask a = disk_mask(spec, R, {c[0] - off, c[1], c[2]});
    const SetMask b = disk_mask(spec, R, {c[0] + off, c[1], c[2]});
    SetMask m(spec);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = a[i] || b[i] ? 1 : 0;
    return m;
  }
  if (d.name == "blob") {
    // Union of seeded disks scattered around the origin.
    SplitMix64 rng(static_cast<std::uint64_t>(d.need("seed")));
    const double R = d.get("R", 10.0 * spec.dx());
    const int lobes = static_cast<int>(d.get("lobes", 5));
    SetMask m(spec, 0);
    for (int k = 0; k < lobes; ++k) {
      std::array<double, 3> p = c;
      for (int a = 0; a < spec.ndims(); ++a) p[a] += rng.uniform(-0.5, 0.5) * R;
      const double rad = rng.uniform(0.35, 0.55) * R;
      const SetMask lobe = disk_mask(spec, rad, p);
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = m[i] || lobe[i] ? 1 : 0;
    }
    return m;
  }
  throw Error(ErrorCode::parse_error, "unknown shape '" + d.name + "'");
}

/// Scalar initial datum: "cone:R=20" gives |x| - R; a set shape gives its
/// signed distance.
inline ScalarField shape_field(const GridSpec& spec, const ShapeDescriptor& d) {
  if (d.name == "cone") {
    const double R = d.need("R");
    ScalarField f(spec);
    for_each_cell(spec, [&](const Coord& p, std::size_t i) {
      const auto x = spec.position(p);
      double d2 = 0.0;
      for (int a = 0; a < spec.ndims(); ++a) d2 += x[a] * x[a];
      f[i] = std::sqrt(d2) - R;
    });
    return f;
  }
  return signed_distance(shape_mask(spec, d)).d;
}

/// Shape mask that must stay `guard` cells clear of the halo.
inline SetMask builtin_shape(const GridSpec& spec, std::string_view descriptor, int guard = 0) {
  const SetMask m = shape_mask(spec, parse_shape(descriptor));
  require(within_guard(m, guard), ErrorCode::domain_too_small,
          "shape '" + std::string(descriptor) + "' violates the guard band");
  return m;
}

}  // namespace nlflow
