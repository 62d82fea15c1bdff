#pragma once

// Dormand-Prince 5(4) embedded Runge-Kutta integrator with step-size control
// and the standard fourth-order continuous extension.

#include "topospec/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

namespace topospec {

using OdeRhs = std::function<void(double t, const Vector& y, Vector& dydt)>;

struct OdeOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-10;
  double initial_step = 0.0;  // 0 selects a step from the initial derivative
  double max_step = std::numeric_limits<double>::infinity();
  double min_step = 1e-14;
  long max_steps = 10'000'000;
};

/// One accepted step with its dense-output coefficients.
struct OdeStep {
  double t0 = 0, t1 = 0;
  Vector y0, y1, f0, f1;
  Vector r2, r3, r4, r5;

  Vector at(double t) const {
    const double h = t1 - t0;
    const double s = (t - t0) / h;
    const double s1 = 1.0 - s;
    return y0 + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5)));
  }

  /// d/dt of the interpolant.
  Vector derivative(double t) const {
    const double h = t1 - t0;
    const double s = (t - t0) / h;
    const double s1 = 1.0 - s;
    const Vector a = r4 + s1 * r5;
    const Vector b = r3 + s * a;
    const Vector c = r2 + s1 * b;
    const Vector db = a - s * r5;
    const Vector dc = -b + s1 * db;
    return (c + s * dc) / h;
  }
};

enum class OdeStatus { completed, stopped, step_underflow };

struct OdeSummary {
  OdeStatus status = OdeStatus::completed;
  long accepted = 0;
  long rejected = 0;
  double t_final = 0.0;
  std::string message;
};

namespace dopri {
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                        a75 = -2187.0 / 6784, a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
inline constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                        d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                        d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;
}  // namespace dopri

/// Integrates y' = f(t, y) from t0 to t_end. `observer(step)` is called after each
/// accepted step and returns false to stop the integration. A DomainError thrown
/// by the right-hand side rejects the step and shrinks it.
template <typename Observer>
OdeSummary integrate_dopri5(const OdeRhs& rhs, double t0, const Vector& y_init, double t_end,
                            const OdeOptions& opt, Observer&& observer) {
  using namespace dopri;
  OdeSummary summary;
  const auto n = y_init.size();
  const double dir = t_end >= t0 ? 1.0 : -1.0;
  double t = t0;
  Vector y = y_init;
  Vector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), y1(n), err(n);
  rhs(t, y, k1);

  auto scale_norm = [&](const Vector& e, const Vector& a, const Vector& b) {
    double s = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sc = opt.abs_tol + opt.rel_tol * std::max(std::abs(a[i]), std::abs(b[i]));
      s += (e[i] / sc) * (e[i] / sc);
    }
    return std::sqrt(s / static_cast<double>(n));
  };

  double h = opt.initial_step;
  if (h <= 0) {
    const double d0 = scale_norm(y, y, y), d1n = scale_norm(k1, y, y);
    h = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
  }
  h = std::min({h, opt.max_step, std::abs(t_end - t0)});
  if (t == t_end) {
    summary.t_final = t;
    return summary;
  }

  while (dir * (t_end - t) > 0) {
    if (summary.accepted + summary.rejected >= opt.max_steps) {
      summary.status = OdeStatus::step_underflow;
      summary.message = "maximum number of steps exceeded";
      break;
    }
    if (h < opt.min_step * std::max(1.0, std::abs(t))) {
      summary.status = OdeStatus::step_underflow;
      summary.message = "step size underflow";
      break;
    }
    bool last = false;
    if (dir * (t + dir * h - t_end) >= 0) {
      h = std::abs(t_end - t);
      last = true;
    }
    const double hs = dir * h;
    double enorm;
    try {
      ytmp = y + hs * a21 * k1;
      rhs(t + c2 * hs, ytmp, k2);
      ytmp = y + hs * (a31 * k1 + a32 * k2);
      rhs(t + c3 * hs, ytmp, k3);
      ytmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
      rhs(t + c4 * hs, ytmp, k4);
      ytmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      rhs(t + c5 * hs, ytmp, k5);
      ytmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      rhs(t + hs, ytmp, k6);
      y1 = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
      rhs(t + hs, y1, k7);
      err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      enorm = scale_norm(err, y, y1);
      if (!std::isfinite(enorm)) enorm = 1e10;
    } catch (const DomainError&) {
      enorm = 1e10;
    }
    if (enorm <= 1.0) {
      OdeStep step;
      step.t0 = t;
      step.t1 = last ? t_end : t + hs;
      step.y0 = y;
      step.y1 = y1;
      step.f0 = k1;
      step.f1 = k7;
      step.r2 = y1 - y;
      step.r3 = hs * k1 - step.r2;
      step.r4 = step.r2 - hs * k7 - step.r3;
      step.r5 = hs * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
      ++summary.accepted;
      t = step.t1;
      y = y1;
      k1 = k7;
      if (!observer(static_cast<const OdeStep&>(step))) {
        summary.status = OdeStatus::stopped;
        break;
      }
      const double fac = enorm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(enorm, -0.2), 0.2, 5.0);
      h = std::min(h * fac, opt.max_step);
    } else {
      ++summary.rejected;
      h *= std::max(0.2, 0.9 * std::pow(enorm, -0.2));
    }
  }
  summary.t_final = t;
  return summary;
}

}  // namespace topospec
