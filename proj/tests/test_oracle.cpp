#include <gtest/gtest.h>

#include <cmath>

#include "nlflow/distance.hpp"
#include "nlflow/oracle.hpp"
#include "nlflow/rng.hpp"
#include "nlflow/rof_solver.hpp"

using namespace nlflow;

namespace {

ScalarField random_field(const GridSpec& spec, std::uint64_t seed, double lo, double hi) {
  SplitMix64 rng(seed);
  ScalarField f(spec);
  for (double& v : f.raw()) v = rng.uniform(lo, hi);
  return f;
}

// Free values in [lo, hi], halo strictly above every free value.
ScalarField tiny_data(const GridSpec& spec, std::uint64_t seed) {
  ScalarField g = random_field(spec, seed, -2.0, 2.0);
  for_each_cell(spec, [&](const Coord& c, std::size_t i) {
    if (spec.in_halo(c)) g[i] = 3.0;
  });
  return g;
}

}  // namespace

TEST(Enumerate, PositiveDataGivesEmptySet) {
  const GridSpec spec({8, 8}, 1.0, 2);
  const auto res = oracle::enumerate_geometric(ScalarField(spec, 0.5), 1.0, make_osc_params(spec, 1.0));
  ASSERT_EQ(res.minimizers.size(), 1u);
  EXPECT_EQ(count(res.minimizers[0]), 0u);
  EXPECT_DOUBLE_EQ(res.min_value, 0.0);
}

TEST(Enumerate, StronglyNegativeDataFillsInterior) {
  const GridSpec spec({7, 7}, 1.0, 2);
  const auto res =
      oracle::enumerate_geometric(ScalarField(spec, -0.5), 1.0, make_osc_params(spec, 1.0), 100.0);
  ASSERT_EQ(res.minimizers.size(), 1u);
  EXPECT_EQ(count(res.minimizers[0]), 9u);
}

TEST(Enumerate, SublevelOfRofSolutionIsMinimal) {
  const GridSpec spec({8, 8}, 1.0, 2);
  const std::vector<Energy> es{make_osc_params(spec, 1.5), make_frac_params(spec, 0.5, 2.0)};
  for (const Energy& e : es)
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const ScalarField g = tiny_data(spec, seed);
      RofOptions o;
      o.tol = 1e-12;
      o.max_iter = 2000000;
      const RofSolution sol = solve_rof({e, g, 1.0}, o);
      for (double t : {-0.5, 0.0, 0.7}) {
        const auto res = oracle::enumerate_geometric(g, 1.0, e, t);
        const SetMask Et = sublevel(sol.u, t);
        EXPECT_LE(oracle::geometric_energy(Et, g, 1.0, e, t), res.min_value + 1e-6);
        EXPECT_TRUE(res.lattice);
      }
    }
}

TEST(Enumerate, BudgetIsEnforced) {
  const GridSpec spec({9, 9}, 1.0, 2);
  try {
    oracle::enumerate_geometric(ScalarField(spec, 0.0), 1.0, make_osc_params(spec, 1.0));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::budget_exceeded);
  }
}

TEST(Envelope, MatchesSolver) {
  const GridSpec spec({8, 8}, 1.0, 2);
  const std::vector<Energy> es{make_osc_params(spec, 1.0), make_frac_params(spec, 0.5, 2.0)};
  for (const Energy& e : es) {
    const ScalarField g = tiny_data(spec, 11);
    const auto env = oracle::exact_rof_envelope(g, 1.0, e);
    RofOptions o;
    o.tol = 1e-12;
    o.max_iter = 2000000;
    const RofSolution sol = solve_rof({e, g, 1.0}, o);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(sol.u[i], env.u[i], 1e-6);
  }
}

TEST(Subgradient, ConstantDataHasZeroObjective) {
  const GridSpec spec({8, 8}, 1.0, 2);
  const auto ref = oracle::subgradient_rof({make_osc_params(spec, 1.0), ScalarField(spec, 2.0), 1.0}, 1000);
  EXPECT_DOUBLE_EQ(ref.objective, 0.0);
}

TEST(BruteHelpers, AgreeWithFastKernels) {
  const GridSpec spec({16, 16}, 1.0, 3);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const ScalarField u = random_field(spec, seed, -1.0, 1.0);
    const double pj = oracle::brute_pairsum(u, 0.5, 3.0), fj = js_value(u, make_frac_params(spec, 0.5, 3.0));
    EXPECT_NEAR(pj, fj, 1e-12 * pj);
    const double bj = oracle::brute_jr(u, 2.0), oj = jr_value(u, make_osc_params(spec, 2.0));
    EXPECT_NEAR(bj, oj, 1e-12 * bj);
    SetMask E = sublevel(u, 0.0);
    const ScalarField bd = oracle::brute_distance(E);
    const auto sd = signed_distance(E);
    for (std::size_t i = 0; i < E.size(); ++i) EXPECT_DOUBLE_EQ(bd[i], sd.d[i]);
    const auto fast = window_extrema(u, ball_offsets(spec, 2.0), {8, 8, 0});
    const auto slow = oracle::brute_window(u, 2.0, {8, 8, 0});
    EXPECT_EQ(fast.min, slow.min);
    EXPECT_EQ(fast.max, slow.max);
    EXPECT_EQ(fast.argmin, slow.argmin);
    EXPECT_EQ(fast.argmax, slow.argmax);
  }
}

TEST(BruteHelpers, TranslationInvariance) {
  const GridSpec spec({16, 16}, 1.0, 3);
  // Support stays r clear of the window centers before and after a shift by (1, -1).
  ScalarField u = random_field(spec, 4, -1.0, 1.0);
  for_each_cell(spec, [&](const Coord& c, std::size_t i) {
    if (c[0] < 4 || c[0] > 10 || c[1] < 5 || c[1] > 11) u[i] = 0.0;
  });
  ScalarField v(spec, 0.0);
  for_each_cell(spec, [&](const Coord& c, std::size_t i) {
    const Coord s{c[0] - 1, c[1] + 1, 0};
    if (spec.contains(s)) v[i] = u.at(s);
  });
  EXPECT_NEAR(oracle::brute_pairsum(u, 0.5, 3.0), oracle::brute_pairsum(v, 0.5, 3.0), 1e-12);
  EXPECT_NEAR(oracle::brute_jr(u, 2.0), oracle::brute_jr(v, 2.0), 1e-12);
}
