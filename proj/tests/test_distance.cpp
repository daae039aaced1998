#include <gtest/gtest.h>

#include <cmath>

#include "nlflow/distance.hpp"
#include "nlflow/oracle.hpp"
#include "nlflow/rng.hpp"

using namespace nlflow;

TEST(SignedDistance, SingleCellCalibration) {
  const GridSpec spec({16, 16}, 1.0, 0);
  SetMask E(spec, 0);
  const Coord o = spec.origin_cell();
  E.at(o) = 1;
  const auto sd = signed_distance(E);
  EXPECT_EQ(sd.state, PhaseState::mixed);
  EXPECT_DOUBLE_EQ(sd.d.at({o[0] + 3, o[1] + 4, 0}), 4.5);
  EXPECT_DOUBLE_EQ(sd.d.at(o), -0.5);
}

TEST(SignedDistance, HalfGrid) {
  for (double dx : {1.0, 0.25}) {
    const GridSpec spec({16, 16}, dx, 0);
    SetMask E(spec, 0);
    for_each_cell(spec, [&](const Coord& c, std::size_t i) { E[i] = spec.position(c)[0] <= 0.0; });
    const auto sd = signed_distance(E);
    for_each_cell(spec, [&](const Coord& c, std::size_t i) {
      // The zero level sits halfway between the last member row and the first outside row.
      EXPECT_NEAR(sd.d[i], spec.position(c)[0] - dx / 2, 1e-12);
    });
  }
}

TEST(SignedDistance, MatchesExhaustiveScan) {
  for (double dx : {1.0, 0.5}) {
    const GridSpec spec({32, 32}, dx, 0);
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      SplitMix64 rng(seed);
      SetMask E(spec, 0);
      const double density = rng.uniform(0.05, 0.6);
      for (auto& v : E.raw()) v = rng.uniform() < density;
      const auto fast = signed_distance(E);
      const ScalarField slow = oracle::brute_distance(E);
      for (std::size_t i = 0; i < E.size(); ++i) EXPECT_NEAR(fast.d[i], slow[i], 1e-12);
    }
  }
}

TEST(SignedDistance, ThreeDimensionsMatchExhaustiveScan) {
  const GridSpec spec({10, 10, 10}, 1.0, 0);
  SplitMix64 rng(3);
  SetMask E(spec, 0);
  for (auto& v : E.raw()) v = rng.uniform() < 0.1;
  const auto fast = signed_distance(E, 0.3);
  const ScalarField slow = oracle::brute_distance(E, 0.3);
  for (std::size_t i = 0; i < E.size(); ++i) EXPECT_NEAR(fast.d[i], slow[i], 1e-12);
}

TEST(SignedDistance, EmptyAndFullSentinels) {
  const GridSpec spec({8, 8}, 0.5, 1);
  const auto e = signed_distance(SetMask(spec, 0));
  const auto f = signed_distance(SetMask(spec, 1));
  EXPECT_EQ(e.state, PhaseState::empty);
  EXPECT_EQ(f.state, PhaseState::full);
  for (double v : e.d.raw()) EXPECT_DOUBLE_EQ(v, spec.diagonal());
  for (double v : f.d.raw()) EXPECT_DOUBLE_EQ(v, -spec.diagonal());
}

TEST(SignedDistance, SignMatchesMembership) {
  const GridSpec spec({24, 24}, 1.0, 0);
  SplitMix64 rng(9);
  SetMask E(spec, 0);
  for (auto& v : E.raw()) v = rng.uniform() < 0.3;
  const auto sd = signed_distance(E);
  for (std::size_t i = 0; i < E.size(); ++i) EXPECT_EQ(sd.d[i] < 0.0, E[i] != 0);
  EXPECT_THROW(signed_distance(E, 1.0), Error);
}

TEST(SquaredDistance, ExactIntegerValues) {
  const GridSpec spec({20, 20}, 1.0, 0);
  SetMask T(spec, 0);
  T.at({3, 4, 0}) = 1;
  T.at({15, 12, 0}) = 1;
  const ScalarField d2 = squared_distance_to(T);
  for_each_cell(spec, [&](const Coord& c, std::size_t i) {
    const double a = (c[0] - 3.0) * (c[0] - 3.0) + (c[1] - 4.0) * (c[1] - 4.0);
    const double b = (c[0] - 15.0) * (c[0] - 15.0) + (c[1] - 12.0) * (c[1] - 12.0);
    EXPECT_EQ(d2[i], std::min(a, b));
  });
}

TEST(SubcellDistance, ConeContourIsCircle) {
  const GridSpec spec({48, 48}, 1.0, 0);
  ScalarField u(spec);
  for_each_cell(spec, [&](const Coord& c, std::size_t i) {
    const auto x = spec.position(c);
    u[i] = std::hypot(x[0], x[1]) - 12.3;
  });
  const auto sd = subcell_signed_distance(u);
  EXPECT_EQ(sd.source.raw(), sublevel(u, 0.0).raw());
  for_each_cell(spec, [&](const Coord& c, std::size_t i) {
    const auto x = spec.position(c);
    if (std::hypot(x[0], x[1]) > 20.0) return;
    EXPECT_NEAR(sd.d[i], u[i], 0.03);
  });
}

TEST(SubcellDistance, RejectsThreeDimensions) {
  const GridSpec spec({6, 6, 6}, 1.0, 0);
  EXPECT_THROW(subcell_signed_distance(ScalarField(spec, 0.0)), Error);
}
