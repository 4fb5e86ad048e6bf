#include <gtest/gtest.h>

#include <cmath>

#include "asymgraph/adam.hpp"

using namespace asymgraph;

TEST(Adam, MatchesReferenceRecurrence) {
  // Minimize (x - 3)^2 from x = 0 and compare against a scalar re-derivation of the update.
  const AdamConfig cfg{0.05, 0.9, 0.999, 1e-8};
  std::vector<RowMatrix<double>> p{RowMatrix<double>::Zero(1, 1)};
  Adam<double> opt(cfg, p);
  long double x = 0, m = 0, v = 0;
  for (int t = 1; t <= 200; ++t) {
    const double g = 2 * (p[0](0, 0) - 3);
    opt.step(p, {RowMatrix<double>::Constant(1, 1, g)});
    const long double gr = 2 * (x - 3);
    m = 0.9L * m + 0.1L * gr;
    v = 0.999L * v + 0.001L * gr * gr;
    const long double mh = m / (1 - std::pow(0.9L, t));
    const long double vh = v / (1 - std::pow(0.999L, t));
    x -= 0.05L * mh / (std::sqrt(vh) + 1e-8L);
    ASSERT_NEAR(p[0](0, 0), static_cast<double>(x), 1e-12) << "step " << t;
  }
  EXPECT_EQ(opt.steps(), 200u);
  EXPECT_NEAR(p[0](0, 0), 3.0, 0.1);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<RowMatrix<double>> p{RowMatrix<double>::Zero(2, 2)};
  Adam<double> opt({0.01, 0.9, 0.999, 1e-8}, p);
  RowMatrix<double> g(2, 2);
  g << 5, -0.2, 0, 1e3;
  opt.step(p, {g});
  EXPECT_NEAR(p[0](0, 0), -0.01, 1e-9);
  EXPECT_NEAR(p[0](0, 1), 0.01, 1e-9);
  EXPECT_EQ(p[0](1, 0), 0.0);
  EXPECT_NEAR(p[0](1, 1), -0.01, 1e-9);
}

TEST(Adam, ZeroLearningRateLeavesParameters) {
  std::vector<RowMatrix<double>> p{RowMatrix<double>::Constant(3, 2, 0.7)};
  const auto before = p;
  Adam<double> opt({0.0, 0.9, 0.999, 1e-8}, p);
  for (int i = 0; i < 5; ++i) opt.step(p, {RowMatrix<double>::Constant(3, 2, 1.5)});
  EXPECT_EQ(p[0], before[0]);
}

TEST(Adam, RestoreContinuesIdentically) {
  const AdamConfig cfg{0.01, 0.9, 0.999, 1e-8};
  std::vector<RowMatrix<double>> a{RowMatrix<double>::Constant(2, 3, 1.0)};
  Adam<double> opt(cfg, a);
  auto grad = [](const RowMatrix<double>& w) { return RowMatrix<double>(w.array().square() - 0.5); };
  for (int i = 0; i < 4; ++i) opt.step(a, {grad(a[0])});
  auto b = a;
  Adam<double> copy(cfg, b);
  copy.restore(opt.first_moments(), opt.second_moments(), opt.steps());
  for (int i = 0; i < 4; ++i) {
    opt.step(a, {grad(a[0])});
    copy.step(b, {grad(b[0])});
  }
  EXPECT_EQ(a[0], b[0]);
}

TEST(Adam, RejectsMismatchedState) {
  std::vector<RowMatrix<double>> p{RowMatrix<double>::Zero(2, 2)};
  Adam<double> opt({}, p);
  EXPECT_THROW(opt.restore({RowMatrix<double>::Zero(3, 2)}, {RowMatrix<double>::Zero(3, 2)}, 1), DataError);
  EXPECT_THROW(opt.restore({}, {}, 1), DataError);
  std::vector<RowMatrix<double>> two{RowMatrix<double>::Zero(2, 2), RowMatrix<double>::Zero(2, 2)};
  EXPECT_THROW(opt.step(two, two), UsageError);
}
