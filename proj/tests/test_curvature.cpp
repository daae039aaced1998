#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "nlflow/curvature.hpp"
#include "nlflow/shapes.hpp"

using namespace nlflow;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST(MinkowskiCurvature, CircleIsInverseRadius) {
  for (double R : {3.0, 8.0, 20.0}) {
    const auto probe = SmoothSetProbe::ball(2, R);
    const auto res = minkowski_curvature(probe, probe.boundary_point(0.7), 2.0);
    EXPECT_TRUE(res.outer_live);
    EXPECT_TRUE(res.inner_live);
    EXPECT_EQ(res.branches(), "both");
    EXPECT_NEAR(res.value, 1.0 / R, 1e-12);
  }
}

TEST(MinkowskiCurvature, SphereIsMeanCurvatureSum) {
  const auto probe = SmoothSetProbe::ball(3, 6.0);
  const auto res = minkowski_curvature(probe, probe.boundary_point(0.3, 1.1), 1.5);
  EXPECT_NEAR(res.value, 2.0 / 6.0, 1e-12);
}

TEST(MinkowskiCurvature, HalfSpaceIsFlat) {
  const auto probe = SmoothSetProbe::half_space(2, {1.0, 1.0, 0.0}, 0.5);
  const Vec3 x{0.5 / std::sqrt(2.0), 0.5 / std::sqrt(2.0), 0.0};
  EXPECT_NEAR(minkowski_curvature(probe, x, 3.0).value, 0.0, 1e-15);
}

TEST(MinkowskiCurvature, SmallDiskKeepsOuterBranchOnly) {
  const double R = 1.0, r = 2.0;
  const auto probe = SmoothSetProbe::ball(2, R);
  const auto res = minkowski_curvature(probe, probe.boundary_point(0.0), r);
  EXPECT_TRUE(res.outer_live);
  EXPECT_FALSE(res.inner_live);
  EXPECT_EQ(res.branches(), "outer");
  EXPECT_NEAR(res.value, (1.0 / (2.0 * r)) * (1.0 + r / R), 1e-12);
}

TEST(MinkowskiCurvature, RadiusAtTheThresholdIsDegenerate) {
  const auto probe = SmoothSetProbe::ball(2, 2.0);
  const auto res = minkowski_curvature(probe, probe.boundary_point(0.0), 2.0);
  EXPECT_TRUE(res.degenerate);
  EXPECT_FALSE(res.defined);
  EXPECT_EQ(res.branches(), "degenerate");
}

TEST(MinkowskiCurvature, PointOffBoundaryIsRejected) {
  const auto probe = SmoothSetProbe::ball(2, 5.0);
  try {
    minkowski_curvature(probe, {1.0, 0.0, 0.0}, 1.0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::not_a_boundary_probe);
  }
}

TEST(MinkowskiCurvature, EllipseTipIsSharper) {
  const auto probe = SmoothSetProbe::ellipse(12.0, 6.0);
  const double tip = minkowski_curvature(probe, probe.boundary_point(0.0), 1.0).value;
  const double side = minkowski_curvature(probe, probe.boundary_point(std::numbers::pi / 2), 1.0).value;
  EXPECT_NEAR(tip, 12.0 / 36.0, 1e-9);
  EXPECT_NEAR(side, 6.0 / 144.0, 1e-9);
}

TEST(FracCurvature, HalfSpaceIsFlat) {
  const auto probe = SmoothSetProbe::half_space(2, {0.0, 1.0, 0.0});
  EXPECT_NEAR(frac_curvature(probe, {3.0, 0.0, 0.0}, 0.5).value, 0.0, 1e-12);
  const auto p3 = SmoothSetProbe::half_space(3, {0.0, 0.0, 1.0});
  EXPECT_NEAR(frac_curvature(p3, {0.0, 0.0, 0.0}, 0.3).value, 0.0, 1e-12);
}

TEST(FracCurvature, BallScalingLaw) {
  for (int N : {2, 3})
    for (double s : {0.3, 0.5, 0.8}) {
      const auto a = SmoothSetProbe::ball(N, 3.0), b = SmoothSetProbe::ball(N, 6.0);
      const double ka = frac_curvature(a, a.boundary_point(0.0), s).value;
      const double kb = frac_curvature(b, b.boundary_point(0.0), s).value;
      EXPECT_NEAR(ka / kb, std::pow(2.0, s), 1e-6);
    }
}

TEST(FracCurvature, BallConstantNormalization) {
  for (int N : {2, 3}) {
    const double C = ball_constant(N, 0.5);
    EXPECT_GT(C, 0.0);
    const auto unit = SmoothSetProbe::ball(N, 1.0);
    EXPECT_NEAR(frac_curvature(unit, unit.boundary_point(1.0), 0.5).value, C, 1e-6 * C);
    for (double R : {2.0, 4.0}) {
      const auto ball = SmoothSetProbe::ball(N, R);
      const double k = frac_curvature(ball, ball.boundary_point(0.0), 0.5).value;
      EXPECT_NEAR(k, C * std::pow(R, -0.5), 0.03 * C * std::pow(R, -0.5));
    }
  }
}

TEST(FracCurvature, TruncatedValuePlusTailIsExact) {
  // Once the set lies inside the cutoff ball the tail estimate is exact.
  const double C = ball_constant(2, 0.5);
  const auto unit = SmoothSetProbe::ball(2, 1.0);
  for (double L : {2.0, 4.0, 8.0}) {
    const auto res = frac_curvature(unit, unit.boundary_point(0.0), 0.5, L);
    EXPECT_NEAR(res.total(), C, 1e-6 * C) << "cutoff " << L;
    EXPECT_LT(res.value, C);
  }
}

TEST(FracCurvature, EllipseTipIsSharper) {
  const auto probe = SmoothSetProbe::ellipse(12.0, 6.0);
  const double tip = frac_curvature(probe, probe.boundary_point(0.0), 0.5).value;
  const double side = frac_curvature(probe, probe.boundary_point(std::numbers::pi / 2), 0.5).value;
  EXPECT_GT(tip, side);
  EXPECT_GT(side, 0.0);
}

TEST(FracCurvature, MaskBoundaryMeanTracksBall) {
  const GridSpec spec({200, 200}, 1.0, 64);
  const auto p = make_frac_params(spec, 0.5, 64.0);
  const double R = 16.0;
  const auto res = frac_curvature_boundary_mean(disk_mask(spec, R), p);
  const double expect = ball_constant(2, 0.5) / std::sqrt(R);
  EXPECT_NEAR(res.total(), expect, 0.05 * expect);
}

TEST(FracCurvature, MaskFaceRequiresBoundary) {
  const GridSpec spec({40, 40}, 1.0, 8);
  const auto p = make_frac_params(spec, 0.5, 8.0);
  const SetMask E = disk_mask(spec, 6.0);
  const Coord o = spec.origin_cell();
  const BoundaryFace f = find_boundary_face(E, o, 0, 1);
  EXPECT_TRUE(E.at(f.cell));
  EXPECT_FALSE(E.at(f.neighbor()));
  EXPECT_GT(frac_curvature(E, f, p).value, 0.0);
  EXPECT_THROW(frac_curvature(E, BoundaryFace{o, 0, 1}, p), Error);
}
