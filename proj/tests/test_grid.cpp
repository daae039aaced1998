#include <gtest/gtest.h>

#include <algorithm>

#include "nlflow/grid.hpp"
#include "nlflow/oracle.hpp"
#include "nlflow/rng.hpp"

using namespace nlflow;

namespace {

bool has_offset(const BallStencil& st, Coord p) {
  return std::find(st.offsets.begin(), st.offsets.end(), p) != st.offsets.end();
}

ScalarField random_field(const GridSpec& spec, std::uint64_t seed) {
  SplitMix64 rng(seed);
  ScalarField f(spec);
  for (double& v : f.raw()) v = rng.uniform(-1.0, 1.0);
  return f;
}

}  // namespace

TEST(GridSpec, RejectsBadGeometry) {
  EXPECT_THROW(GridSpec({3, 8}, 1.0, 0), Error);
  EXPECT_THROW(GridSpec({8, 8}, 0.0, 1), Error);
  EXPECT_THROW(GridSpec({8, 8}, 1.0, 4), Error);
  EXPECT_THROW(GridSpec({8}, 1.0, 1), Error);
  EXPECT_NO_THROW(GridSpec({8, 8, 8}, 0.5, 3));
}

TEST(GridSpec, IndexAndCoordAreInverse) {
  const GridSpec spec({6, 7, 5}, 1.0, 1);
  for (std::size_t i = 0; i < spec.size(); ++i) EXPECT_EQ(spec.index(spec.coord(i)), i);
}

TEST(GridSpec, OriginSitsAtHalfDims) {
  const GridSpec spec({8, 10}, 0.5, 2);
  const Coord o = spec.origin_cell();
  EXPECT_EQ(o[0], 4);
  EXPECT_EQ(o[1], 5);
  const auto x = spec.position(o);
  EXPECT_DOUBLE_EQ(x[0], 0.0);
  EXPECT_DOUBLE_EQ(x[1], 0.0);
  EXPECT_DOUBLE_EQ(spec.position({5, 5, 0})[0], 0.5);
}

TEST(BallOffsets, UnitRadiusHasFivePoints) {
  const GridSpec spec({8, 8}, 1.0, 2);
  const BallStencil st = ball_offsets(spec, 1.0);
  EXPECT_EQ(st.size(), 5u);
  for (Coord p : {Coord{0, 0, 0}, Coord{1, 0, 0}, Coord{-1, 0, 0}, Coord{0, 1, 0}, Coord{0, -1, 0}})
    EXPECT_TRUE(has_offset(st, p));
}

TEST(BallOffsets, ZeroRadiusIsCenterOnly) {
  const GridSpec spec({8, 8}, 1.0, 2);
  const BallStencil st = ball_offsets(spec, 0.0);
  ASSERT_EQ(st.size(), 1u);
  EXPECT_EQ(st.offsets[0], (Coord{0, 0, 0}));
}

TEST(BallOffsets, RadiusOneAndHalfAddsDiagonals) {
  const GridSpec spec({8, 8}, 1.0, 2);
  const BallStencil st = ball_offsets(spec, 1.5);
  EXPECT_EQ(st.size(), 9u);
  EXPECT_TRUE(has_offset(st, {1, 1, 0}));
  EXPECT_TRUE(has_offset(st, {-1, 1, 0}));
}

TEST(BallOffsets, ExactLatticeDistanceIsIncluded) {
  const GridSpec spec({16, 16}, 1.0, 6);
  EXPECT_TRUE(has_offset(ball_offsets(spec, 5.0), {3, 4, 0}));
  const GridSpec fine({16, 16}, 0.5, 6);
  EXPECT_TRUE(has_offset(ball_offsets(fine, 2.5), {3, 4, 0}));
}

TEST(BallOffsets, ClosedUnderAxisFlips) {
  const GridSpec spec({16, 16, 16}, 1.0, 4);
  const BallStencil st = ball_offsets(spec, 2.7);
  for (const Coord& p : st.offsets) {
    EXPECT_TRUE(has_offset(st, {-p[0], p[1], p[2]}));
    EXPECT_TRUE(has_offset(st, {p[0], -p[1], p[2]}));
    EXPECT_TRUE(has_offset(st, {p[0], p[1], -p[2]}));
  }
}

TEST(BallOffsets, StencilMustFitInsideHalo) {
  const GridSpec spec({8, 8}, 1.0, 2);
  try {
    ball_offsets(spec, 2.0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::stencil_exceeds_halo);
  }
  EXPECT_NO_THROW(ball_offsets(spec, 2.0, false));
}

TEST(WindowExtrema, ConstantField) {
  const GridSpec spec({8, 8}, 1.0, 2);
  const ScalarField u(spec, 3.5);
  const auto ex = window_extrema(u, ball_offsets(spec, 1.0), {4, 4, 0});
  EXPECT_EQ(ex.min, 3.5);
  EXPECT_EQ(ex.max, 3.5);
  // Ties go to the lexicographically first offset.
  EXPECT_EQ(ex.argmin, (Coord{-1, 0, 0}));
  EXPECT_EQ(ex.argmax, (Coord{-1, 0, 0}));
}

TEST(WindowExtrema, LinearField) {
  const GridSpec spec({8, 8}, 1.0, 2);
  ScalarField u(spec);
  for_each_cell(spec, [&](const Coord& c, std::size_t i) { u[i] = spec.position(c)[0]; });
  const Coord w{3, 5, 0};
  const auto ex = window_extrema(u, ball_offsets(spec, 1.0), w);
  EXPECT_DOUBLE_EQ(ex.min, u.at(w) - 1.0);
  EXPECT_DOUBLE_EQ(ex.max, u.at(w) + 1.0);
  EXPECT_EQ(ex.argmax, (Coord{1, 0, 0}));
}

TEST(WindowExtrema, MatchesExhaustiveScan) {
  const GridSpec spec({16, 16}, 1.0, 3);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const ScalarField u = random_field(spec, seed);
    const BallStencil st = ball_offsets(spec, 2.5);
    for_each_cell(spec, [&](const Coord& c, std::size_t) {
      if (c[0] < 2 || c[1] < 2 || c[0] >= 14 || c[1] >= 14) return;
      const auto fast = window_extrema(u, st, c);
      const auto slow = oracle::brute_window(u, 2.5, c);
      EXPECT_EQ(fast.min, slow.min);
      EXPECT_EQ(fast.max, slow.max);
    });
  }
}

TEST(WindowExtrema, OutOfBoundsWindowThrows) {
  const GridSpec spec({8, 8}, 1.0, 2);
  const ScalarField u(spec, 0.0);
  try {
    window_extrema(u, ball_offsets(spec, 1.0), {0, 4, 0});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::window_out_of_bounds);
  }
}

TEST(HaloBand, Counts) {
  EXPECT_EQ(count(halo_band(GridSpec({8, 8}, 1.0, 0))), 0u);
  EXPECT_EQ(count(halo_band(GridSpec({8, 8}, 1.0, 2))), 48u);
  EXPECT_EQ(count(halo_band(GridSpec({8, 8, 8}, 1.0, 1))), 296u);
}

TEST(SetOps, SublevelComplementSubset) {
  const GridSpec spec({8, 8}, 1.0, 1);
  const ScalarField u = random_field(spec, 9);
  const SetMask a = sublevel(u, -0.2), b = sublevel(u, 0.3);
  EXPECT_TRUE(subset(a, b));
  EXPECT_FALSE(subset(b, a) && count(a) != count(b));
  EXPECT_EQ(count(a) + count(complement(a)), spec.size());
  const ScalarField ind = indicator(a);
  for (std::size_t i = 0; i < ind.size(); ++i) EXPECT_EQ(ind[i], a[i] ? 1.0 : 0.0);
}

TEST(SetOps, HaloAndGuardChecks) {
  const GridSpec spec({12, 12}, 1.0, 2);
  SetMask m(spec, 0);
  m.at({6, 6, 0}) = 1;
  EXPECT_FALSE(touches_halo(m));
  EXPECT_TRUE(within_guard(m, 3));
  EXPECT_FALSE(within_guard(m, 5));
  m.at({1, 6, 0}) = 1;
  EXPECT_TRUE(touches_halo(m));
}
