#include <gtest/gtest.h>

#include <vector>

#include "broadface/errors.hpp"
#include "broadface/optim.hpp"

namespace broadface {
namespace {

SgdConfig plain_sgd(double lr, double momentum = 0.0, double wd = 0.0) {
  return {momentum, wd, LrSchedule::constant(lr)};
}

TEST(Sgd, VanillaStep) {
  SgdState state(plain_sgd(0.1));
  std::vector<double> p{1.0, -2.0};
  const std::vector<double> g{0.5, 3.0};
  sgd_step(p, g, state, 0);
  EXPECT_DOUBLE_EQ(p[0], 1.0 - 0.05);
  EXPECT_DOUBLE_EQ(p[1], -2.0 - 0.3);
}

TEST(Sgd, ZeroGradientWithFreshMomentumIsNoOp) {
  SgdState state(plain_sgd(0.1, 0.9));
  std::vector<double> p{1.0, 2.0};
  sgd_step(p, std::vector<double>{0.0, 0.0}, state, 0);
  EXPECT_EQ(p, (std::vector<double>{1.0, 2.0}));
}

TEST(Sgd, ZeroGradientCoastsOnMomentum) {
  SgdState state(plain_sgd(0.1, 0.5));
  std::vector<double> p{0.0};
  sgd_step(p, std::vector<double>{1.0}, state, 0);
  sgd_step(p, std::vector<double>{0.0}, state, 1);
  EXPECT_NEAR(p[0], -0.1 - 0.05, 1e-15);
}

TEST(Sgd, TwoStepMomentumRecurrence) {
  const double mu = 0.9, wd = 5e-4, lr = 0.05;
  SgdState state(plain_sgd(lr, mu, wd));
  std::vector<double> p{0.7};
  const double g1 = 0.3, g2 = -1.1;
  sgd_step(p, std::vector<double>{g1}, state, 0);
  sgd_step(p, std::vector<double>{g2}, state, 1);

  double param = 0.7;
  double v = g1 + wd * param;
  param -= lr * v;
  v = mu * v + g2 + wd * param;
  param -= lr * v;
  EXPECT_NEAR(p[0], param, 1e-12);
}

TEST(Sgd, ShapeMismatchThrows) {
  SgdState state(plain_sgd(0.1));
  std::vector<double> p{1.0, 2.0};
  EXPECT_THROW(sgd_step(p, std::vector<double>{1.0}, state, 0), DimensionMismatch);
  sgd_step(p, std::vector<double>{1.0, 1.0}, state, 0);
  std::vector<double> longer{1.0, 2.0, 3.0};
  EXPECT_THROW(sgd_step(longer, std::vector<double>{1.0, 1.0, 1.0}, state, 1), DimensionMismatch);
}

TEST(Sgd, DecreasesConvexQuadratic) {
  SgdState state(plain_sgd(1e-3, 0.9, 0.0));
  std::vector<double> p{0.3, -1.2, 2.5};
  auto objective = [&] { return p[0] * p[0] + p[1] * p[1] + p[2] * p[2]; };
  const double before = objective();
  sgd_step(p, std::vector<double>{2 * p[0], 2 * p[1], 2 * p[2]}, state, 0);
  EXPECT_LT(objective(), before);
}

TEST(Sgd, Deterministic) {
  auto run = [] {
    SgdState state({0.9, 5e-4, LrSchedule::step_decay(40, 0.1)});
    std::vector<double> p{0.1, 0.2, 0.3};
    for (std::size_t it = 0; it < 40; ++it) sgd_step(p, std::vector<double>{p[2], -p[0], p[1] * p[1]}, state, it);
    return p;
  };
  EXPECT_EQ(run(), run());
}

TEST(LrSchedule, PiecewiseLookup) {
  const LrSchedule schedule{{{50000, 5e-3}, {70000, 5e-4}, {80000, 5e-5}}};
  EXPECT_EQ(lr_at(schedule, 10), 5e-3);
  EXPECT_EQ(lr_at(schedule, 49999), 5e-3);
  EXPECT_EQ(lr_at(schedule, 50000), 5e-4);
  EXPECT_EQ(lr_at(schedule, 75000), 5e-5);
  EXPECT_EQ(lr_at(schedule, 1000000), 5e-5);
}

TEST(LrSchedule, ConstantHoldsEverywhere) {
  const auto schedule = LrSchedule::constant(0.25);
  for (std::size_t it : {0u, 1u, 999u, 123456u}) EXPECT_EQ(lr_at(schedule, it), 0.25);
}

TEST(LrSchedule, StepDecayShape) {
  const auto schedule = LrSchedule::step_decay(80000, 5e-3);
  EXPECT_EQ(schedule, (LrSchedule{{{50000, 5e-3}, {70000, 5e-4}, {80000, 5e-5}}}));
}

TEST(LrSchedule, ScaledMultipliesEveryRateKeepsThresholds) {
  const LrSchedule schedule{{{50000, 5e-3}, {70000, 5e-4}, {80000, 5e-5}}};
  EXPECT_EQ(schedule.scaled(4.0), (LrSchedule{{{50000, 2e-2}, {70000, 2e-3}, {80000, 2e-4}}}));
}

TEST(LrSchedule, Validation) {
  EXPECT_THROW(LrSchedule{}.validate(), InvalidArgument);
  EXPECT_THROW((LrSchedule{{{10, 0.1}, {10, 0.01}}}.validate()), InvalidArgument);
  EXPECT_THROW((LrSchedule{{{10, 0.0}}}.validate()), InvalidArgument);
  EXPECT_THROW((SgdConfig{1.0, 0.0, LrSchedule::constant(0.1)}.validate()), InvalidArgument);
  EXPECT_THROW((SgdConfig{0.9, -1.0, LrSchedule::constant(0.1)}.validate()), InvalidArgument);
}

}  // namespace
}  // namespace broadface
