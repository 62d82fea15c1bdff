#include "topospec/ode.hpp"
#include "topospec/quadrature.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace topospec;

TEST(GaussLegendre, ExactForPolynomialsUpToDegree2nMinus1) {
  for (int n : {2, 5, 10, 16}) {
    const auto& rule = gauss_legendre(n);
    for (int d = 0; d <= 2 * n - 1; ++d) {
      double s = 0;
      for (int i = 0; i < n; ++i) s += rule.weights[i] * std::pow(rule.nodes[i], d);
      const double exact = d % 2 ? 0.0 : 2.0 / (d + 1);
      EXPECT_NEAR(s, exact, 1e-14) << "n=" << n << " d=" << d;
    }
  }
  EXPECT_THROW(gauss_legendre(1), NumericalError);
}

TEST(Adaptive, KnownIntegrals) {
  const double pi = std::numbers::pi;
  EXPECT_NEAR(integrate_adaptive([](double x) { return std::sin(x); }, 0, pi).value, 2.0, 1e-12);
  EXPECT_NEAR(integrate_adaptive([](double x) { return std::exp(-x * x); }, -8, 8).value,
              std::sqrt(pi), 1e-12);
  // endpoint square-root singularity: integral of 1/sqrt(x) on (0, 1]
  QuadratureOptions opt;
  opt.abs_tol = opt.rel_tol = 1e-10;
  opt.max_panels = 20000;
  const auto r = integrate_adaptive([](double x) { return 1.0 / std::sqrt(x); }, 0, 1, opt);
  EXPECT_NEAR(r.value, 2.0, 1e-8);
}

TEST(Adaptive, IteratedDiscArea) {
  // area of the unit disc and the integral of x^2 + y^2 over it (= pi/2)
  auto lo = [](double x) { return -std::sqrt(std::max(0.0, 1 - x * x)); };
  auto hi = [](double x) { return std::sqrt(std::max(0.0, 1 - x * x)); };
  QuadratureOptions opt;
  opt.abs_tol = opt.rel_tol = 1e-10;
  opt.max_panels = 20000;
  const auto r = integrate_iterated([](double x, double y) { return x * x + y * y; }, -1, 1, lo, hi, opt);
  EXPECT_NEAR(r.value, std::numbers::pi / 2, 1e-8);
}

TEST(PairwiseSum, IndependentOfChunking) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> xs(10007);
  for (auto& x : xs) x = u(rng);
  long double exact = 0;
  for (double x : xs) exact += x;
  EXPECT_NEAR(pairwise_sum(xs), static_cast<double>(exact), 1e-12);
  EXPECT_EQ(pairwise_sum(xs), pairwise_sum(xs));
}

TEST(Dopri5, ExponentialAndDenseOutput) {
  OdeRhs rhs = [](double, const Vector& y, Vector& dy) { dy = -y; };
  Vector y0(1);
  y0 << 1.0;
  OdeOptions opt;
  opt.rel_tol = opt.abs_tol = 1e-12;
  double worst = 0;
  Vector last;
  auto summary = integrate_dopri5(rhs, 0.0, y0, 3.0, opt, [&](const OdeStep& s) {
    const double mid = 0.5 * (s.t0 + s.t1);
    worst = std::max(worst, std::abs(s.at(mid)[0] - std::exp(-mid)));
    worst = std::max(worst, std::abs(s.derivative(mid)[0] + std::exp(-mid)));
    last = s.y1;
    return true;
  });
  EXPECT_EQ(summary.status, OdeStatus::completed);
  EXPECT_DOUBLE_EQ(summary.t_final, 3.0);
  EXPECT_NEAR(last[0], std::exp(-3.0), 1e-11);
  EXPECT_LT(worst, 1e-9);
}

TEST(Dopri5, DomainErrorRejectsStep) {
  // the first trial step after the initial evaluation is refused
  int calls = 0;
  OdeRhs rhs = [&](double, const Vector&, Vector& dy) {
    if (++calls == 2) throw DomainError("outside");
    dy = Vector::Ones(1);
  };
  Vector y0 = Vector::Zero(1);
  Vector last;
  auto summary = integrate_dopri5(rhs, 0.0, y0, 1.0, OdeOptions{}, [&](const OdeStep& s) {
    last = s.y1;
    return true;
  });
  EXPECT_EQ(summary.status, OdeStatus::completed);
  EXPECT_EQ(summary.rejected, 1);
  EXPECT_NEAR(last[0], 1.0, 1e-14);
}
