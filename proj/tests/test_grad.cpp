#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "bbr/grad.hpp"
#include "oracles.hpp"

using namespace bbr;
using bbr::testing::BoxSampler;

namespace {

LossSpec spec_of(LossKind k, std::optional<double> ratio = std::nullopt) {
  LossSpec s;
  s.base = k;
  s.ratio = ratio;
  return s;
}

std::vector<LossSpec> all_specs() {
  std::vector<LossSpec> out;
  for (LossKind k : kAllLossKinds) {
    out.push_back(spec_of(k));
    for (double r : {0.7, 1.3}) out.push_back(spec_of(k, r));
  }
  LossSpec frozen = spec_of(LossKind::SIoU);
  frozen.siou.freeze_angle = true;
  out.push_back(frozen);
  LossSpec printed = spec_of(LossKind::SIoU, 0.8);
  printed.siou.printed_shape_sign = true;
  printed.siou.halve_terms = false;
  out.push_back(printed);
  return out;
}

bool close(double analytic, double fd) {
  const double diff = std::abs(analytic - fd);
  return diff <= 1e-7 || diff <= 1e-4 * std::max(std::abs(analytic), std::abs(fd));
}

}  // namespace

TEST(GradAnalytic, MatchesFiniteDifferencesOnSmoothPairs) {
  BoxSampler s(31);
  const auto specs = all_specs();
  int checked = 0;
  while (checked < 2000) {
    const auto [a, gt] = bbr::testing::random_pair(s);
    for (const LossSpec& spec : specs) {
      if (!bbr::testing::is_smooth_pair(a, gt, spec.ratio.value_or(1.0), 1e-3)) continue;
      const Grad4 g = grad_analytic(spec, a, gt);
      const Grad4 f = grad_fd(spec, a, gt, 1e-5);
      ASSERT_TRUE(close(g.dx, f.dx) && close(g.dy, f.dy) && close(g.dw, f.dw) && close(g.dh, f.dh))
          << spec.name() << " " << a.str() << " " << gt.str() << "\n analytic " << g.dx << " "
          << g.dy << " " << g.dw << " " << g.dh << "\n fd " << f.dx << " " << f.dy << " " << f.dw
          << " " << f.dh;
    }
    ++checked;
  }
}

TEST(GradAnalytic, IouHandValue) {
  // overlap 5 x 10, union 150: d(inter)/dx = +10 and d(union)/dx = -10
  const Grad4 g = grad_analytic(spec_of(LossKind::IoU), Box(0, 0, 10, 10), Box(5, 0, 10, 10));
  EXPECT_NEAR(g.dx, -(10.0 * 150 - 50 * -10.0) / (150.0 * 150.0), 1e-15);
  EXPECT_NEAR(g.dx, -2000.0 / 22500.0, 1e-15);
  EXPECT_NEAR(g.dy, 0.0, 1e-15);
}

TEST(GradAnalytic, RatioOneEqualsBase) {
  BoxSampler s(32);
  for (int i = 0; i < 5000; ++i) {
    const auto [a, gt] = bbr::testing::random_pair(s);
    for (LossKind k : kAllLossKinds) {
      const Grad4 g0 = grad_analytic(spec_of(k), a, gt);
      const Grad4 g1 = grad_analytic(spec_of(k, 1.0), a, gt);
      ASSERT_NEAR(g0.dx, g1.dx, 1e-10);
      ASSERT_NEAR(g0.dy, g1.dy, 1e-10);
      ASSERT_NEAR(g0.dw, g1.dw, 1e-10);
      ASSERT_NEAR(g0.dh, g1.dh, 1e-10);
    }
  }
}

TEST(GradAnalytic, MirrorAntiSymmetry) {
  BoxSampler s(33);
  for (int i = 0; i < 3000; ++i) {
    const auto [a, gt] = bbr::testing::random_pair(s);
    const Box ma(-a.x(), a.y(), a.w(), a.h()), mg(-gt.x(), gt.y(), gt.w(), gt.h());
    for (const LossSpec& spec : all_specs()) {
      const Grad4 g = grad_analytic(spec, a, gt);
      const Grad4 m = grad_analytic(spec, ma, mg);
      ASSERT_NEAR(g.dx, -m.dx, 1e-10) << spec.name();
      ASSERT_NEAR(g.dy, m.dy, 1e-10) << spec.name();
      ASSERT_NEAR(g.dw, m.dw, 1e-10) << spec.name();
      ASSERT_NEAR(g.dh, m.dh, 1e-10) << spec.name();
    }
  }
}

TEST(GradAnalytic, CoincidentBoxesAreStationary) {
  const Box b(3, -1, 6, 4);
  for (const LossSpec& spec : all_specs()) {
    const Grad4 g = grad_analytic(spec, b, b);
    EXPECT_NEAR(g.dx, 0.0, 1e-12) << spec.name();
    EXPECT_NEAR(g.dy, 0.0, 1e-12) << spec.name();
    EXPECT_NEAR(g.dw, 0.0, 1e-12) << spec.name();
    EXPECT_NEAR(g.dh, 0.0, 1e-12) << spec.name();
  }
}

TEST(GradAnalytic, DisjointIouPlateauButGiouPulls) {
  const Box a(0, 0, 4, 4), gt(20, 5, 4, 4);
  const Grad4 gi = grad_analytic(spec_of(LossKind::IoU), a, gt);
  EXPECT_EQ(gi.dx, 0.0);
  EXPECT_EQ(gi.dy, 0.0);
  EXPECT_EQ(gi.dw, 0.0);
  EXPECT_EQ(gi.dh, 0.0);
  const Grad4 gg = grad_analytic(spec_of(LossKind::GIoU), a, gt);
  EXPECT_LT(gg.dx, 0.0);  // moving toward gt lowers the loss
  EXPECT_LT(gg.dy, 0.0);
  // DIoU along y: the enclosing height shrinks faster than the center gap here,
  // so the penalty pushes away; only the dominant x axis pulls.
  const Grad4 gd = grad_analytic(spec_of(LossKind::DIoU), a, gt);
  EXPECT_LT(gd.dx, 0.0);
  EXPECT_GT(gd.dy, 0.0);
}

TEST(GradFd, RejectsBadStepAndInvalidPerturbation) {
  const Box a(0, 0, 1, 1);
  EXPECT_THROW(grad_fd(spec_of(LossKind::IoU), a, a, 0.0), std::invalid_argument);
  EXPECT_THROW(grad_fd(spec_of(LossKind::IoU), a, a, -1e-5), std::invalid_argument);
  EXPECT_THROW(grad_fd(spec_of(LossKind::IoU), a, a, 2.0), std::invalid_argument);
}

TEST(GradMagnitude1d, MatchesSymbolicSquareShift) {
  // Equal squares of side s shifted by d along x: IoU = (s - d) / (s + d),
  // dIoU/dd = -2s / (s + d)^2.
  const Box gt(0, 0, 10, 10);
  for (double d : {0.5, 2.0, 7.5}) {
    const double expect = 2 * 10.0 / ((10 + d) * (10 + d));
    EXPECT_NEAR(grad_magnitude_1d(spec_of(LossKind::IoU), gt.translated(d, 0), gt, Axis::X),
                expect, 1e-13);
    EXPECT_NEAR(grad_magnitude_1d(spec_of(LossKind::IoU), gt.translated(-d, 0), gt, Axis::X),
                expect, 1e-13);
    EXPECT_NEAR(grad_magnitude_1d(spec_of(LossKind::IoU), gt.translated(0, d), gt, Axis::Y),
                expect, 1e-13);
    // inner boxes of side 8: same formula with s = 8 while they overlap
    EXPECT_NEAR(grad_magnitude_1d(spec_of(LossKind::IoU, 0.8), gt.translated(d, 0), gt, Axis::X),
                2 * 8.0 / ((8 + d) * (8 + d)), 1e-13);
  }
  // one-sided at zero: the outward derivative of (s - d)/(s + d)
  EXPECT_NEAR(grad_magnitude_1d(spec_of(LossKind::IoU), gt, gt, Axis::X), 0.2, 1e-13);
  EXPECT_EQ(grad_magnitude_1d(spec_of(LossKind::IoU), gt.translated(11, 0), gt, Axis::X), 0.0);
  EXPECT_EQ(grad_magnitude_1d(spec_of(LossKind::IoU, 0.8), gt.translated(9, 0), gt, Axis::X), 0.0);
}

TEST(GradMagnitude1d, DiagonalMatchesFiniteDifference) {
  const Box gt(0, 0, 10, 10);
  for (double d : {-6.3, -2.1, 1.7, 4.4}) {
    const Box a = gt.translated(d, d);
    const double h = 1e-6;
    const double fd = (iou(gt.translated(d + h, d + h), gt) - iou(gt.translated(d - h, d - h), gt)) /
                      (2 * h);
    EXPECT_NEAR(grad_magnitude_1d(spec_of(LossKind::IoU), a, gt, Axis::Diagonal), std::abs(fd),
                1e-7);
  }
}
