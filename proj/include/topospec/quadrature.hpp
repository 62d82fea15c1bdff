#pragma once

// Gauss-Legendre panels with global adaptive subdivision, and pairwise summation
// so that the reduction result does not depend on evaluation order.

#include "topospec/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <queue>
#include <span>
#include <vector>

namespace topospec {

struct GaussLegendreRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

namespace detail {

inline GaussLegendreRule compute_gauss_legendre(int n) {
  GaussLegendreRule rule{std::vector<double>(n), std::vector<double>(n)};
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1, p1 = x;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p0 = 1, p1 = x;
    for (int j = 2; j <= n; ++j) {
      const double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1);
    const double w = 2.0 / ((1 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

}  // namespace detail

/// Cached rules for 2 <= n <= 32.
inline const GaussLegendreRule& gauss_legendre(int n) {
  static const auto table = [] {
    std::array<GaussLegendreRule, 33> t;
    for (int i = 2; i <= 32; ++i) t[i] = detail::compute_gauss_legendre(i);
    return t;
  }();
  if (n < 2 || n > 32) throw NumericalError("gauss_legendre: order must be in [2, 32]");
  return table[n];
}

/// Pairwise (cascade) summation.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0;
    for (double x : xs) s += x;
    return s;
  }
  const auto half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

struct QuadratureOptions {
  double abs_tol = 1e-9;
  double rel_tol = 1e-9;
  int order = 10;          // Gauss-Legendre points per panel
  int max_panels = 4000;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;      // sum of panel error estimates
  int panels = 0;
  bool converged = true;
};

template <typename F>
double gauss_legendre_panel(const F& f, double a, double b, int order) {
  const auto& rule = gauss_legendre(order);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  std::array<double, 32> terms{};
  for (int i = 0; i < order; ++i) terms[i] = rule.weights[i] * f(mid + half * rule.nodes[i]);
  return half * pairwise_sum(std::span<const double>(terms.data(), order));
}

/// Global adaptive quadrature: the panel with the largest error estimate
/// (|I(panel) - I(left) - I(right)|) is split until the total estimate meets
/// max(abs_tol, rel_tol * |I|).
template <typename F>
QuadratureResult integrate_adaptive(const F& f, double a, double b, const QuadratureOptions& opt = {}) {
  QuadratureResult result;
  if (a == b) return result;
  struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
  };
  auto refine = [&](double lo, double hi, double coarse) {
    const double mid = 0.5 * (lo + hi);
    const double l = gauss_legendre_panel(f, lo, mid, opt.order);
    const double r = gauss_legendre_panel(f, mid, hi, opt.order);
    return std::array<Panel, 2>{Panel{lo, mid, l, 0.5 * std::abs(l + r - coarse)},
                                Panel{mid, hi, r, 0.5 * std::abs(l + r - coarse)}};
  };
  std::priority_queue<Panel> heap;
  const double whole = gauss_legendre_panel(f, a, b, opt.order);
  for (const auto& p : refine(a, b, whole)) heap.push(p);
  auto totals = [&] {
    std::vector<Panel> all;
    auto copy = heap;
    while (!copy.empty()) {
      all.push_back(copy.top());
      copy.pop();
    }
    std::sort(all.begin(), all.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
    std::vector<double> values, errors;
    for (const auto& p : all) {
      values.push_back(p.value);
      errors.push_back(p.error);
    }
    return std::pair{pairwise_sum(values), pairwise_sum(errors)};
  };
  double error = 0.0, value = 0.0;
  for (;;) {
    std::tie(value, error) = totals();
    if (error <= std::max(opt.abs_tol, opt.rel_tol * std::abs(value))) break;
    if (static_cast<int>(heap.size()) >= opt.max_panels) {
      result.converged = false;
      break;
    }
    // split every panel carrying a large share of the error in one sweep
    std::vector<Panel> keep, split;
    const double threshold = error / (2.0 * static_cast<double>(heap.size()));
    while (!heap.empty()) {
      const Panel p = heap.top();
      heap.pop();
      (p.error >= threshold && split.size() < 64 ? split : keep).push_back(p);
    }
    for (const auto& p : keep) heap.push(p);
    for (const auto& p : split)
      for (const auto& c : refine(p.a, p.b, p.value)) heap.push(c);
  }
  result.value = value;
  result.error = error;
  result.panels = static_cast<int>(heap.size());
  return result;
}

/// Iterated integral over {a <= x <= b, lo(x) <= y <= hi(x)}.
template <typename F, typename Lo, typename Hi>
QuadratureResult integrate_iterated(const F& f, double a, double b, const Lo& lo, const Hi& hi,
                                    const QuadratureOptions& opt = {}) {
  QuadratureOptions inner = opt;
  inner.abs_tol = opt.abs_tol * 0.1 / std::max(1.0, std::abs(b - a));
  inner.rel_tol = opt.rel_tol * 0.1;
  double inner_error = 0.0;
  bool inner_converged = true;
  auto outer = [&](double x) {
    const auto r = integrate_adaptive([&](double y) { return f(x, y); }, lo(x), hi(x), inner);
    inner_error = std::max(inner_error, r.error);
    inner_converged = inner_converged && r.converged;
    return r.value;
  };
  QuadratureResult res = integrate_adaptive(outer, a, b, opt);
  res.error += inner_error * std::abs(b - a);
  res.converged = res.converged && inner_converged;
  return res;
}

}  // namespace topospec
