#pragma once

// Generalized ROF problem
//
//   min_u  J(u) + (cv / 2h) * sum over free cells (u - g)^2,   u = g on the halo,
//
// for the oscillation energy, its weighted sum over radii, or the truncated
// fractional energy. J(u) = max over the dual set Z of <K u, z>, so the dual
// problem is the maximization of
//
//   D(z) = sum_all g q - (1 / 2 gamma) sum_free q^2,   q = K^T z,  gamma = cv / h,
//
// a smooth concave function over a set with cheap exact projection. The
// solver runs accelerated projected gradient ascent on D with adaptive
// restart. The primal iterate u(z) = g - q / gamma satisfies the
// Euler-Lagrange identity -h Div z + u = g exactly, and the duality gap
// equals the complementarity slack J(u) - <K u, z>.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "nlflow/error.hpp"
#include "nlflow/frac_energy.hpp"
#include "nlflow/grid.hpp"
#include "nlflow/osc_energy.hpp"
#include "nlflow/parallel.hpp"

namespace nlflow {

using Energy = std::variant<OscEnergyParams, FracEnergyParams, WeightedOscParams>;
using Dual = std::variant<OscDual, FracDual, WeightedOscDual>;

inline const char* energy_name(const Energy& e) {
  switch (e.index()) {
    case 0: return "osc";
    case 1: return "frac";
    default: return "weighted_osc";
  }
}

inline double energy_value(const ScalarField& u, const Energy& e) {
  if (auto* p = std::get_if<OscEnergyParams>(&e)) return jr_value(u, *p);
  if (auto* p = std::get_if<FracEnergyParams>(&e)) return js_value(u, *p);
  return jf_value(u, std::get<WeightedOscParams>(e));
}

/// Set perimeter for the selected energy (the set must avoid the halo).
inline double set_perimeter(const SetMask& E, const Energy& e) {
  if (auto* p = std::get_if<OscEnergyParams>(&e)) return perimeter_osc(E, *p);
  if (auto* p = std::get_if<FracEnergyParams>(&e)) return perimeter_frac(E, *p);
  require(!touches_halo(E), ErrorCode::set_touches_boundary);
  return jf_value(indicator(E), std::get<WeightedOscParams>(e));
}

/// Nonlocal divergence of a dual field of the matching kind.
inline ScalarField divergence(const Dual& z, const Energy& e) {
  require(z.index() == e.index(), ErrorCode::mismatched_problems, "dual and energy differ in kind");
  if (auto* p = std::get_if<OscEnergyParams>(&e)) return osc_divergence(std::get<OscDual>(z), *p);
  if (auto* p = std::get_if<FracEnergyParams>(&e)) return div_s(std::get<FracDual>(z), *p);
  return weighted_osc_divergence(std::get<WeightedOscDual>(z), std::get<WeightedOscParams>(e));
}

/// Largest interaction reach in cells (stencil reach or kernel cutoff).
inline int energy_reach(const Energy& e) {
  if (auto* p = std::get_if<OscEnergyParams>(&e)) return p->stencil.reach;
  if (auto* p = std::get_if<FracEnergyParams>(&e)) return p->reach;
  return std::get<WeightedOscParams>(e).parts.back().stencil.reach;
}

struct RofProblem {
  Energy energy;
  ScalarField g;
  double h = 1.0;
};

struct RofOptions {
  double tol = 1e-4;
  long max_iter = 20000;
  int check_every = 10;
  const Dual* warm_start = nullptr;
};

struct RofSolution {
  ScalarField u;
  Dual dual;
  double residual = 0.0;   ///< sup over free cells of |-h Div z + u - g|
  double gap = 0.0;        ///< relative duality gap
  double abs_gap = 0.0;
  double primal = 0.0;     ///< full objective at u
  double dual_value = 0.0;
  long iterations = 0;
  bool converged = false;
};

/// Raised when max_iter is reached; carries the best iterate found.
class NotConverged : public Error {
 public:
  NotConverged(const std::string& detail, RofSolution best)
      : Error(ErrorCode::not_converged, detail), best_(std::make_shared<RofSolution>(std::move(best))) {}
  const RofSolution& best() const { return *best_; }

 private:
  std::shared_ptr<RofSolution> best_;
};

namespace detail {

/// Restriction of K to the blocks that touch at least one free cell.
class RofOperator {
 public:
  virtual ~RofOperator() = default;
  virtual std::size_t dual_size() const = 0;
  /// z = Proj_Z(y + t K u).
  virtual void ascend(const std::vector<double>& u, const std::vector<double>& y, double t,
                      std::vector<double>& z) const = 0;
  /// q = K^T z.
  virtual void adjoint(const std::vector<double>& z, std::vector<double>& q) const = 0;
  /// Energy of the active blocks at u.
  virtual double energy(const std::vector<double>& u) const = 0;
  virtual double pairing(const std::vector<double>& u, const std::vector<double>& z) const = 0;
  /// ||K_free||^2 (or an upper bound).
  virtual double norm_sq(const std::vector<std::uint8_t>& free) const = 0;
  /// Energy of the blocks seeing pinned cells only (constant).
  virtual double pinned_energy() const = 0;
  virtual Dual export_dual(const std::vector<double>& z) const = 0;
  virtual bool import_dual(const Dual& d, std::vector<double>& z) const = 0;
};

class OscOperator final : public RofOperator {
 public:
  OscOperator(const GridSpec& spec, const std::vector<const OscEnergyParams*>& parts,
              const std::vector<double>& weights, const ScalarField& g, bool weighted)
      : spec_(spec), g_(g), weighted_(weighted) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      Part part;
      part.p = parts[k];
      part.c = weights[k] * parts[k]->coefficient();
      part.n = parts[k]->stencil.size();
      part.offset = offset;
      const auto& st = part.p->stencil;
      part.p->windows.for_each(spec, [&](std::size_t w, std::size_t center, const Coord&) {
        bool any_free = false;
        for (std::ptrdiff_t s : st.strides)
          if (!spec.in_halo(spec.coord(center + s))) {
            any_free = true;
            break;
          }
        if (any_free) {
          part.active.push_back(static_cast<std::uint32_t>(w));
          part.centers.push_back(static_cast<std::uint32_t>(center));
        } else {
          part.pinned_const += part.c * window_osc(g.values(), st, center);
        }
      });
      offset += part.active.size() * 2 * part.n;
      parts_.push_back(std::move(part));
    }
    size_ = offset;
  }

  std::size_t dual_size() const override { return size_; }

  void ascend(const std::vector<double>& u, const std::vector<double>& y, double t,
              std::vector<double>& z) const override {
    for (const Part& P : parts_) {
      const auto& strides = P.p->stencil.strides;
      const std::size_t n = P.n;
      parallel_for(P.active.size(), [&](std::size_t b, std::size_t e) {
        std::vector<double> scratch;
        scratch.reserve(2 * n);
        for (std::size_t w = b; w < e; ++w) {
          const std::size_t base = P.offset + w * 2 * n;
          const std::size_t center = P.centers[w];
          double* a = z.data() + base;
          double* bb = a + n;
          for (std::size_t i = 0; i < n; ++i) {
            const double ku = t * P.c * u[center + strides[i]];
            a[i] = y[base + i] + ku;
            bb[i] = y[base + n + i] - ku;
          }
          // The product of unit simplices has the same support function
          // as the full window dual set and projects in linear time.
          detail::project_unit_simplex(std::span<double>(a, n), scratch);
          detail::project_unit_simplex(std::span<double>(bb, n), scratch);
        }
      }, 256);
    }
  }

  void adjoint(const std::vector<double>& z, std::vector<double>& q) const override {
    std::fill(q.begin(), q.end(), 0.0);
    for (const Part& P : parts_) {
      const auto& strides = P.p->stencil.strides;
      const std::size_t n = P.n;
      for (std::size_t w = 0; w < P.active.size(); ++w) {
        const double* a = z.data() + P.offset + w * 2 * n;
        const double* b = a + n;
        const std::size_t center = P.centers[w];
        for (std::size_t i = 0; i < n; ++i) q[center + strides[i]] += P.c * (a[i] - b[i]);
      }
    }
  }

  double energy(const std::vector<double>& u) const override {
    double sum = 0.0;
    for (const Part& P : parts_) {
      double part = 0.0;
      for (std::uint32_t center : P.centers) part += window_osc(u, P.p->stencil, center);
      sum += P.c * part;
    }
    return sum;
  }

  double pairing(const std::vector<double>& u, const std::vector<double>& z) const override {
    double sum = 0.0;
    for (const Part& P : parts_) {
      const auto& strides = P.p->stencil.strides;
      const std::size_t n = P.n;
      double part = 0.0;
      for (std::size_t w = 0; w < P.active.size(); ++w) {
        const double* a = z.data() + P.offset + w * 2 * n;
        const double* b = a + n;
        for (std::size_t i = 0; i < n; ++i) part += (a[i] - b[i]) * u[P.centers[w] + strides[i]];
      }
      sum += P.c * part;
    }
    return sum;
  }

  double norm_sq(const std::vector<std::uint8_t>& free) const override {
    // K^T K is diagonal: each dual coordinate reads a single cell.
    std::vector<double> diag(spec_.size(), 0.0);
    for (const Part& P : parts_)
      for (std::uint32_t center : P.centers)
        for (std::ptrdiff_t s : P.p->stencil.strides) diag[center + s] += 2.0 * P.c * P.c;
    double m = 0.0;
    for (std::size_t i = 0; i < diag.size(); ++i)
      if (free[i]) m = std::max(m, diag[i]);
    return m;
  }

  double pinned_energy() const override {
    double s = 0.0;
    for (const Part& P : parts_) s += P.pinned_const;
    return s;
  }

  Dual export_dual(const std::vector<double>& z) const override {
    WeightedOscDual out;
    for (const Part& P : parts_) {
      // Pinned-only windows get the argmax/argmin certificate of g.
      OscDual d = osc_certificate(g_, *P.p);
      const std::size_t n = P.n;
      for (std::size_t w = 0; w < P.active.size(); ++w) {
        const double* a = z.data() + P.offset + w * 2 * n;
        std::copy(a, a + n, d.a.begin() + P.active[w] * n);
        std::copy(a + n, a + 2 * n, d.b.begin() + P.active[w] * n);
      }
      out.parts.push_back(std::move(d));
    }
    if (!weighted_) return std::move(out.parts.front());
    return out;
  }

  bool import_dual(const Dual& d, std::vector<double>& z) const override {
    const std::vector<OscDual>* parts = nullptr;
    std::vector<OscDual> single;
    if (!weighted_) {
      if (auto* o = std::get_if<OscDual>(&d)) {
        single.push_back(*o);
        parts = &single;
      }
    } else if (auto* wd = std::get_if<WeightedOscDual>(&d)) {
      parts = &wd->parts;
    }
    if (!parts || parts->size() != parts_.size()) return false;
    for (std::size_t k = 0; k < parts_.size(); ++k) {
      const Part& P = parts_[k];
      const OscDual& src = (*parts)[k];
      if (!(src.spec == spec_) || src.width != P.n || src.windows != P.p->windows.count())
        return false;
      for (std::size_t w = 0; w < P.active.size(); ++w) {
        double* a = z.data() + P.offset + w * 2 * P.n;
        std::copy_n(src.a.begin() + P.active[w] * P.n, P.n, a);
        std::copy_n(src.b.begin() + P.active[w] * P.n, P.n, a + P.n);
        project_osc_dual(std::span<double>(a, P.n), std::span<double>(a + P.n, P.n));
      }
    }
    return true;
  }

 private:
  struct Part {
    const OscEnergyParams* p = nullptr;
    double c = 0.0;
    std::size_t n = 0;
    std::size_t offset = 0;
    std::vector<std::uint32_t> active;   ///< window ordinals
    std::vector<std::uint32_t> centers;  ///< linear center indices
    double pinned_const = 0.0;
  };
  GridSpec spec_;
  const ScalarField& g_;
  bool weighted_;
  std::vector<Part> parts_;
  std::size_t size_ = 0;
};

class FracOperator final : public RofOperator {
 public:
  FracOperator(const GridSpec& spec, const FracEnergyParams& p, const ScalarField& g)
      : spec_(spec), p_(p), g_(g) {
    w_.resize(p.width());
    for (std::size_t j = 0; j < p.width(); ++j) w_[j] = p.pair_weight(j);
    for_each_pair(spec, p, [&](std::size_t x, std::size_t y, std::size_t j) {
      if (spec.in_halo(spec.coord(x)) && spec.in_halo(spec.coord(y))) {
        pinned_const_ += w_[j] * std::abs(g[x] - g[y]);
        return;
      }
      x_.push_back(static_cast<std::uint32_t>(x));
      j_.push_back(static_cast<std::uint16_t>(j));
    });
  }

  std::size_t dual_size() const override { return x_.size(); }

  void ascend(const std::vector<double>& u, const std::vector<double>& y, double t,
              std::vector<double>& z) const override {
    const auto& strides = p_.strides;
    parallel_for(x_.size(), [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) {
        const std::size_t x = x_[k];
        const std::size_t yy = x + strides[j_[k]];
        const double v = y[k] + t * w_[j_[k]] * (u[x] - u[yy]);
        z[k] = std::clamp(v, -1.0, 1.0);
      }
    });
  }

  void adjoint(const std::vector<double>& z, std::vector<double>& q) const override {
    std::fill(q.begin(), q.end(), 0.0);
    const auto& strides = p_.strides;
    for (std::size_t k = 0; k < x_.size(); ++k) {
      const double v = w_[j_[k]] * z[k];
      q[x_[k]] += v;
      q[x_[k] + strides[j_[k]]] -= v;
    }
  }

  double energy(const std::vector<double>& u) const override {
    double s = 0.0;
    for (std::size_t k = 0; k < x_.size(); ++k)
      s += w_[j_[k]] * std::abs(u[x_[k]] - u[x_[k] + p_.strides[j_[k]]]);
    return s;
  }

  double pairing(const std::vector<double>& u, const std::vector<double>& z) const override {
    double s = 0.0;
    for (std::size_t k = 0; k < x_.size(); ++k)
      s += w_[j_[k]] * z[k] * (u[x_[k]] - u[x_[k] + p_.strides[j_[k]]]);
    return s;
  }

  double norm_sq(const std::vector<std::uint8_t>& free) const override {
    // Gershgorin bound on K_free^T K_free.
    std::vector<double> row(spec_.size(), 0.0);
    for (std::size_t k = 0; k < x_.size(); ++k) {
      const std::size_t x = x_[k], y = x + p_.strides[j_[k]];
      const double w2 = w_[j_[k]] * w_[j_[k]];
      const double both = (free[x] && free[y]) ? 2.0 : 1.0;
      row[x] += w2 * both;
      row[y] += w2 * both;
    }
    double m = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i)
      if (free[i]) m = std::max(m, row[i]);
    return m;
  }

  double pinned_energy() const override { return pinned_const_; }

  Dual export_dual(const std::vector<double>& z) const override {
    FracDual d = frac_certificate(g_, p_);
    for (std::size_t k = 0; k < x_.size(); ++k) d.z[x_[k] * d.width + j_[k]] = z[k];
    return d;
  }

  bool import_dual(const Dual& d, std::vector<double>& z) const override {
    auto* f = std::get_if<FracDual>(&d);
    if (!f || !(f->spec == spec_) || f->width != p_.width()) return false;
    for (std::size_t k = 0; k < x_.size(); ++k)
      z[k] = std::clamp(f->z[x_[k] * f->width + j_[k]], -1.0, 1.0);
    return true;
  }

 private:
  GridSpec spec_;
  const FracEnergyParams& p_;
  const ScalarField& g_;
  std::vector<double> w_;
  std::vector<std::uint32_t> x_;
  std::vector<std::uint16_t> j_;
  double pinned_const_ = 0.0;
};

inline std::unique_ptr<RofOperator> make_operator(const RofProblem& p) {
  const GridSpec& spec = p.g.spec();
  if (auto* o = std::get_if<OscEnergyParams>(&p.energy)) {
    detail::check_grid(spec, *o);
    return std::make_unique<OscOperator>(spec, std::vector<const OscEnergyParams*>{o},
                                         std::vector<double>{1.0}, p.g, false);
  }
  if (auto* f = std::get_if<FracEnergyParams>(&p.energy)) {
    detail::check_grid(spec, *f);
    require(f->width() < 65536, ErrorCode::invalid_argument, "cutoff too large");
    return std::make_unique<FracOperator>(spec, *f, p.g);
  }
  const auto& wp = std::get<WeightedOscParams>(p.energy);
  std::vector<const OscEnergyParams*> parts;
  for (const auto& part : wp.parts) {
    detail::check_grid(spec, part);
    parts.push_back(&part);
  }
  return std::make_unique<OscOperator>(spec, parts, wp.weights, p.g, true);
}

}  // namespace detail

/// sup over free cells of |-h Div z + u - g|, evaluated through the public
/// divergence of the full dual.
inline double rof_residual(const RofProblem& p, const ScalarField& u, const Dual& z) {
  const ScalarField d = divergence(z, p.energy);
  const GridSpec& spec = u.spec();
  double r = 0.0;
  for_each_cell(spec, [&](const Coord& c, std::size_t i) {
    if (!spec.in_halo(c)) r = std::max(r, std::abs(-p.h * d[i] + u[i] - p.g[i]));
  });
  return r;
}

/// Full objective J(u) + (cv/2h) sum_free (u - g)^2.
inline double rof_objective(const RofProblem& p, const ScalarField& u) {
  const GridSpec& spec = u.spec();
  double quad = 0.0;
  for_each_cell(spec, [&](const Coord& c, std::size_t i) {
    if (!spec.in_halo(c)) quad += (u[i] - p.g[i]) * (u[i] - p.g[i]);
  });
  return energy_value(u, p.energy) + spec.cell_volume() / (2.0 * p.h) * quad;
}

inline RofSolution solve_rof(const RofProblem& p, const RofOptions& opt = {}) {
  const GridSpec& spec = p.g.spec();
  require(p.h > 0.0 && std::isfinite(p.h), ErrorCode::invalid_argument, "h must be positive");
  require(opt.tol > 0.0, ErrorCode::invalid_argument, "tol must be positive");
  require(all_finite(p.g), ErrorCode::invalid_argument, "g must be finite");
  const auto op = detail::make_operator(p);

  const std::size_t ncell = spec.size();
  std::vector<std::uint8_t> free(ncell, 0);
  for_each_cell(spec, [&](const Coord& c, std::size_t i) { free[i] = spec.in_halo(c) ? 0 : 1; });
  const double gamma = spec.cell_volume() / p.h;
  const double gnorm = std::accumulate(p.g.raw().begin(), p.g.raw().end(), 0.0,
                                       [](double m, double v) { return std::max(m, std::abs(v)); });
  const std::vector<double>& g = p.g.raw();

  const std::size_t m = op->dual_size();
  std::vector<double> z(m, 0.0), z_new(m, 0.0), y(m, 0.0), q(ncell, 0.0), u(ncell, 0.0);
  if (opt.warm_start) op->import_dual(*opt.warm_start, z);
  y = z;

  const double lip = op->norm_sq(free) / gamma;
  const double step = lip > 0.0 ? 1.0 / lip : 0.0;
  const double j_pinned = op->pinned_energy();

  auto primal_of = [&](const std::vector<double>& zz) {
    op->adjoint(zz, q);
    for (std::size_t i = 0; i < ncell; ++i) u[i] = free[i] ? g[i] - q[i] / gamma : g[i];
  };

  struct Eval {
    double primal, dual, abs_gap, rel_gap;
  };
  auto evaluate = [&](const std::vector<double>& zz) {
    primal_of(zz);
    double quad = 0.0, gq = 0.0, qq = 0.0;
    for (std::size_t i = 0; i < ncell; ++i) {
      gq += g[i] * q[i];
      if (free[i]) {
        quad += (u[i] - g[i]) * (u[i] - g[i]);
        qq += q[i] * q[i];
      }
    }
    const double j_active = op->energy(u);
    Eval e;
    e.primal = j_active + j_pinned + 0.5 * gamma * quad;
    e.dual = gq - 0.5 * qq / gamma + j_pinned;
    e.abs_gap = std::max(0.0, j_active - op->pairing(u, zz));
    e.rel_gap = e.abs_gap / std::max(1.0, std::abs(e.primal));
    return e;
  };

  std::vector<double> best_z = z;
  double best_gap = std::numeric_limits<double>::infinity();
  long iter = 0;
  bool done = false;
  double t = 1.0;

  auto check = [&]() {
    const Eval e = evaluate(z);
    if (e.rel_gap < best_gap) {
      best_gap = e.rel_gap;
      best_z = z;
    }
    return e.rel_gap <= opt.tol;
  };

  if (m == 0 || check()) done = true;
  while (!done && iter < opt.max_iter) {
    primal_of(y);
    op->ascend(u, y, step, z_new);
    ++iter;
    // Adaptive restart when the momentum points against the gradient step.
    double dir = 0.0;
    for (std::size_t k = 0; k < m; ++k) dir += (y[k] - z_new[k]) * (z_new[k] - z[k]);
    double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    double beta = (t - 1.0) / t_next;
    if (dir > 0.0) {
      t_next = 1.0;
      beta = 0.0;
    }
    for (std::size_t k = 0; k < m; ++k) {
      y[k] = z_new[k] + beta * (z_new[k] - z[k]);
      z[k] = z_new[k];
    }
    t = t_next;
    if (iter % opt.check_every == 0 && check()) done = true;
  }
  if (!done && check()) done = true;

  RofSolution sol;
  const Eval e = evaluate(best_z);
  sol.u = ScalarField(spec, u);
  sol.dual = op->export_dual(best_z);
  sol.primal = e.primal;
  sol.dual_value = e.dual;
  sol.abs_gap = e.abs_gap;
  sol.gap = e.rel_gap;
  sol.iterations = iter;
  sol.residual = rof_residual(p, sol.u, sol.dual);
  sol.converged = sol.gap <= opt.tol && sol.residual <= opt.tol * (1.0 + gnorm);
  if (!sol.converged)
    throw NotConverged("relative gap " + std::to_string(sol.gap) + ", residual " +
                           std::to_string(sol.residual) + " after " + std::to_string(iter) +
                           " iterations",
                       std::move(sol));
  return sol;
}

/// (A_t, E_t) = ({u < t}, {u <= t}).
inline std::pair<SetMask, SetMask> threshold_solution(const ScalarField& u, double t) {
  SetMask A(u.spec()), E(u.spec());
  for (std::size_t i = 0; i < u.size(); ++i) {
    A[i] = u[i] < t ? 1 : 0;
    E[i] = u[i] <= t ? 1 : 0;
  }
  return {A, E};
}

/// True iff u1 <= u2 + 2 tol everywhere, for problems with the same energy
/// kind, grid and h and ordered data g1 <= g2.
inline bool comparison_check(const RofProblem& p1, const RofProblem& p2, const RofSolution& s1,
                             const RofSolution& s2, double tol) {
  require(p1.energy.index() == p2.energy.index() && p1.h == p2.h &&
              p1.g.spec() == p2.g.spec() && s1.u.spec() == s2.u.spec() &&
              s1.u.spec() == p1.g.spec(),
          ErrorCode::mismatched_problems);
  for (std::size_t i = 0; i < p1.g.size(); ++i)
    require(p1.g[i] <= p2.g[i], ErrorCode::mismatched_problems, "data are not ordered");
  for (std::size_t i = 0; i < s1.u.size(); ++i)
    if (s1.u[i] > s2.u[i] + 2.0 * tol) return false;
  return true;
}

struct LipschitzReport {
  double lip_g = 0.0;           ///< over pairs within the interaction range
  double lip_u = 0.0;
  double lip_g_adjacent = 0.0;  ///< over axis neighbours
  double lip_u_adjacent = 0.0;
};

/// Discrete Lipschitz constants max |f(x) - f(y)| / |x - y| over cell pairs
/// with |x - y| <= range_cells * dx. With interior_only, pairs touching the
/// halo are skipped: the pinned band is Dirichlet data, not part of the flow.
inline LipschitzReport lipschitz_check(const ScalarField& g, const ScalarField& u,
                                       int range_cells = 2, bool interior_only = false) {
  require(g.spec() == u.spec(), ErrorCode::mismatched_problems, "fields on different grids");
  require(range_cells >= 1, ErrorCode::invalid_argument, "range must be at least one cell");
  const GridSpec& spec = g.spec();
  LipschitzReport rep;
  const int R = range_cells, R2 = spec.ndims() == 3 ? R : 0;
  for_each_cell(spec, [&](const Coord& c, std::size_t i) {
    if (interior_only && spec.in_halo(c)) return;
    for (int a = 0; a <= R; ++a)
      for (int b = -R; b <= R; ++b)
        for (int d = -R2; d <= R2; ++d) {
          const Coord o{a, b, d};
          if (!lex_positive(o)) continue;
          const double n2 = double(a) * a + double(b) * b + double(d) * d;
          if (n2 > double(R) * R) continue;
          const Coord y{c[0] + a, c[1] + b, c[2] + d};
          if (!spec.contains(y) || (interior_only && spec.in_halo(y))) continue;
          const std::size_t j = spec.index(y);
          const double dist = std::sqrt(n2) * spec.dx();
          const double sg = std::abs(g[i] - g[j]) / dist, su = std::abs(u[i] - u[j]) / dist;
          rep.lip_g = std::max(rep.lip_g, sg);
          rep.lip_u = std::max(rep.lip_u, su);
          if (n2 == 1.0) {
            rep.lip_g_adjacent = std::max(rep.lip_g_adjacent, sg);
            rep.lip_u_adjacent = std::max(rep.lip_u_adjacent, su);
          }
        }
  });
  return rep;
}

}  // namespace nlflow
