#pragma once

// Central finite-difference stencils shared by every module that needs
// derivatives of sampled quantities.

#include "topospec/types.hpp"

#include <cmath>

namespace topospec {

/// Central-difference configuration. The step actually used at q is
/// step_scale * (1 + |q|); order selects the 2-point or 4-point stencil.
struct FiniteDifference {
  double step_scale = 1e-5;
  int order = 2;

  double step_at(const Vector& q) const { return step_scale * (1.0 + q.norm()); }
  double step_at(double x) const { return step_scale * (1.0 + std::abs(x)); }
};

/// d f / d q^axis at q. f may return double, Vector or Matrix.
template <typename F>
auto partial(const F& f, const Vector& q, Eigen::Index axis, const FiniteDifference& fd) {
  const double h = fd.step_at(q);
  Vector qp = q;
  Vector qm = q;
  qp[axis] += h;
  qm[axis] -= h;
  using R = std::decay_t<decltype(f(q))>;
  if (fd.order == 4) {
    Vector qpp = q;
    Vector qmm = q;
    qpp[axis] += 2.0 * h;
    qmm[axis] -= 2.0 * h;
    return R((-f(qpp) + 8.0 * f(qp) - 8.0 * f(qm) + f(qmm)) / (12.0 * h));
  }
  if (fd.order != 2) throw NumericalError("finite difference: order must be 2 or 4");
  return R((f(qp) - f(qm)) / (2.0 * h));
}

/// First derivative of a scalar function of one variable.
template <typename F>
double derivative1(const F& f, double x, const FiniteDifference& fd) {
  const double h = fd.step_at(x);
  if (fd.order == 4)
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
  return (f(x + h) - f(x - h)) / (2 * h);
}

/// Second derivative of a scalar function of one variable.
template <typename F>
double derivative2(const F& f, double x, const FiniteDifference& fd) {
  const double h = fd.step_at(x);
  if (fd.order == 4)
    return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (12 * h * h);
  return (f(x + h) - 2 * f(x) + f(x - h)) / (h * h);
}

}  // namespace topospec
