#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "nlflow/frac_energy.hpp"
#include "nlflow/oracle.hpp"
#include "nlflow/rng.hpp"
#include "nlflow/shapes.hpp"

using namespace nlflow;

namespace {

ScalarField random_field(const GridSpec& spec, std::uint64_t seed) {
  SplitMix64 rng(seed);
  ScalarField f(spec);
  for (double& v : f.raw()) v = rng.uniform(-1.0, 1.0);
  return f;
}

FracDual random_dual(const GridSpec& spec, const FracEnergyParams& p, std::uint64_t seed) {
  SplitMix64 rng(seed);
  FracDual z(spec, p);
  for_each_pair(spec, p, [&](std::size_t x, std::size_t, std::size_t j) {
    z.z[x * z.width + j] = rng.uniform(-1.0, 1.0);
  });
  return z;
}

}  // namespace

TEST(FracConstant, ClosedForms) {
  EXPECT_DOUBLE_EQ(cs_constant(2, 0.5), 0.25);
  EXPECT_DOUBLE_EQ(cs_constant(3, 0.5), 0.5 / std::numbers::pi);
  EXPECT_NEAR(cs_constant(2, 1.0 - 1e-9), 0.0, 1e-9);
  EXPECT_THROW(cs_constant(2, 1.0), Error);
  EXPECT_THROW(cs_constant(4, 0.5), Error);
}

TEST(FracParams, HalfStencilCoversEachPairOnce) {
  const GridSpec spec({16, 16}, 1.0, 3);
  const auto p = make_frac_params(spec, 0.5, 3.0);
  // Lattice points with 0 < |p| <= 3: 28, half of them stored.
  EXPECT_EQ(p.width(), 14u);
  for (const Coord& o : p.offsets) EXPECT_TRUE(lex_positive(o));
}

TEST(FracParams, CutoffNeedsHalo) {
  const GridSpec spec({16, 16}, 1.0, 3);
  EXPECT_THROW(make_frac_params(spec, 0.5, 4.0), Error);
  EXPECT_THROW(make_frac_params(spec, 0.5, 1.0), Error);
}

TEST(FracEnergy, ConstantFieldHasZeroEnergy) {
  const GridSpec spec({12, 12}, 1.0, 3);
  EXPECT_EQ(js_value(ScalarField(spec, -1.5), make_frac_params(spec, 0.5, 3.0)), 0.0);
}

TEST(FracEnergy, PositivelyHomogeneousAndTranslationInvariant) {
  const GridSpec spec({12, 12}, 1.0, 3);
  const auto p = make_frac_params(spec, 0.3, 3.0);
  const ScalarField u = random_field(spec, 1);
  ScalarField v = u;
  for (double& x : v.raw()) x = 2.5 * x - 4.0;
  EXPECT_NEAR(js_value(v, p), 2.5 * js_value(u, p), 1e-12 * js_value(v, p));
}

TEST(FracEnergy, MatchesPairDoubleLoop) {
  for (double dx : {1.0, 0.5}) {
    const GridSpec spec({8, 8}, dx, 2);
    for (double s : {0.2, 0.5, 0.8}) {
      const auto p = make_frac_params(spec, s, 2.0 * dx);
      for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const ScalarField u = random_field(spec, seed);
        const double fast = js_value(u, p), slow = oracle::brute_pairsum(u, s, 2.0 * dx);
        EXPECT_NEAR(fast, slow, 1e-12 * slow);
      }
    }
  }
}

TEST(FracEnergy, ThreeDimensionsMatchPairDoubleLoop) {
  const GridSpec spec({6, 6, 6}, 1.0, 2);
  const auto p = make_frac_params(spec, 0.5, 2.0);
  const ScalarField u = random_field(spec, 4);
  const double slow = oracle::brute_pairsum(u, 0.5, 2.0);
  EXPECT_NEAR(js_value(u, p), slow, 1e-12 * slow);
}

TEST(FracPerimeter, EmptySetIsZero) {
  const GridSpec spec({16, 16}, 1.0, 4);
  EXPECT_EQ(perimeter_frac(SetMask(spec, 0), make_frac_params(spec, 0.5, 4.0)), 0.0);
}

TEST(FracPerimeter, SingleCellSumsTheStencil) {
  const GridSpec spec({16, 16}, 1.0, 6);
  const auto p = make_frac_params(spec, 0.5, 6.0);
  SetMask E(spec, 0);
  E.at(spec.origin_cell()) = 1;
  double expect = 0.0;
  for (int a = -6; a <= 6; ++a)
    for (int b = -6; b <= 6; ++b) {
      const double n2 = a * a + b * b;
      if (n2 == 0 || n2 > 36) continue;
      expect += 0.25 / std::pow(std::sqrt(n2), 2.5);
    }
  EXPECT_NEAR(perimeter_frac(E, p), expect, 1e-12 * expect);
}

TEST(FracPerimeter, CoareaOverThreeLevels) {
  const GridSpec spec({24, 24}, 1.0, 3);
  const auto p = make_frac_params(spec, 0.5, 3.0);
  const SetMask A = disk_mask(spec, 3.0), B = disk_mask(spec, 5.0), C = disk_mask(spec, 7.0);
  ScalarField u(spec, 3.0);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = A[i] ? 0.0 : (B[i] ? 1.0 : (C[i] ? 2.0 : 3.0));
  const double sum = perimeter_frac(A, p) + perimeter_frac(B, p) + perimeter_frac(C, p);
  EXPECT_NEAR(js_value(u, p), sum, 1e-12 * sum);
}

TEST(FracDivergence, ZeroDualGivesZero) {
  const GridSpec spec({10, 10}, 1.0, 2);
  const auto p = make_frac_params(spec, 0.5, 2.0);
  const ScalarField d = div_s(FracDual(spec, p), p);
  for (double v : d.raw()) EXPECT_EQ(v, 0.0);
}

TEST(FracDivergence, ConstantsPairToZero) {
  const GridSpec spec({10, 10}, 1.0, 2);
  const auto p = make_frac_params(spec, 0.5, 2.0);
  const FracDual z = random_dual(spec, p, 3);
  EXPECT_NEAR(frac_pairing(ScalarField(spec, 1.25), z, p), 0.0, 1e-13);
  double sum = 0.0;
  const ScalarField d = div_s(z, p);
  for (double v : d.raw()) sum += v;
  EXPECT_NEAR(sum, 0.0, 1e-12);
}

TEST(FracDivergence, AdjointOfPairing) {
  for (double dx : {1.0, 0.5}) {
    const GridSpec spec({10, 10}, dx, 2);
    const auto p = make_frac_params(spec, 0.4, 2.0 * dx);
    const FracDual z = random_dual(spec, p, 5);
    const ScalarField phi = random_field(spec, 6);
    const ScalarField d = div_s(z, p);
    const double cv = spec.cell_volume();
    double lhs = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) lhs += d[i] * phi[i] * cv;
    // Explicit sum over stored pairs.
    double rhs = 0.0;
    for_each_cell(spec, [&](const Coord& c, std::size_t x) {
      for (std::size_t j = 0; j < p.width(); ++j) {
        const Coord& o = p.offsets[j];
        const Coord y{c[0] + o[0], c[1] + o[1], 0};
        if (y[0] < 0 || y[1] < 0 || y[0] >= 10 || y[1] >= 10) continue;
        const double dist = std::sqrt(double(o[0] * o[0] + o[1] * o[1])) * dx;
        const double k = cs_constant(2, 0.4) / std::pow(dist, 2.4);
        rhs -= k * z.z[x * z.width + j] * (phi[x] - phi.at(y)) * cv * cv;
      }
    });
    EXPECT_NEAR(lhs, rhs, 1e-12 * (1.0 + std::abs(rhs)));
    EXPECT_NEAR(lhs, -frac_pairing(phi, z, p), 1e-12 * (1.0 + std::abs(rhs)));
  }
}

TEST(FracDivergence, InfeasibleDualIsRejected) {
  const GridSpec spec({10, 10}, 1.0, 2);
  const auto p = make_frac_params(spec, 0.5, 2.0);
  FracDual z(spec, p);
  z.z[0] = 1.5;
  EXPECT_THROW(div_s(z, p), Error);
}

TEST(FracCertificate, SignFieldHasZeroSlack) {
  const GridSpec spec({14, 14}, 1.0, 3);
  const auto p = make_frac_params(spec, 0.5, 3.0);
  const ScalarField u = random_field(spec, 7);
  const FracDual z = frac_certificate(u, p);
  const auto rep = frac_dual_check(u, z, p, 1e-12);
  EXPECT_TRUE(rep.pass);
  EXPECT_NEAR(rep.max_slack, 0.0, 1e-15);
  EXPECT_NEAR(frac_pairing(u, z, p), js_value(u, p), 1e-12 * js_value(u, p));
}

TEST(FracCertificate, ZeroDualHasSlackEqualToDifferences) {
  const GridSpec spec({14, 14}, 1.0, 3);
  const auto p = make_frac_params(spec, 0.5, 3.0);
  const ScalarField u = random_field(spec, 8);
  const auto rep = frac_dual_check(u, FracDual(spec, p), p, 1e-9);
  EXPECT_FALSE(rep.pass);
  EXPECT_NEAR(rep.weighted_slack, js_value(u, p), 1e-12 * js_value(u, p));
  double max_diff = 0.0;
  for_each_pair(spec, p, [&](std::size_t x, std::size_t y, std::size_t) {
    max_diff = std::max(max_diff, std::abs(u[x] - u[y]));
  });
  EXPECT_DOUBLE_EQ(rep.max_slack, max_diff);
}
