#pragma once

// Newtonian and Jacobi-geodesic integration, time/affine reparametrization,
// the reduced action and a second-order stationarity check.

#include "topospec/csv.hpp"
#include "topospec/finite_difference.hpp"
#include "topospec/ode.hpp"
#include "topospec/quadrature.hpp"
#include "topospec/scalar_fields.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace topospec {

struct NewtonianState {
  Vector q;
  Vector qdot;
  double t = 0.0;
};

struct GeodesicState {
  Vector q;
  Vector qprime;
  double stilde = 0.0;
};

enum class Parametrization { time, affine };

enum class Termination { completed, boundary, step_underflow };

struct TrajectorySample {
  double param;
  Vector q;
  Vector v;  // dq/dt or dq/ds~
};

struct IntegratorInfo {
  std::string method;
  double rel_tol = 0.0;
  double abs_tol = 0.0;
  long accepted = 0;
  long rejected = 0;
  // max |H - E|/|E| for time-parametrized runs, max |h(q',q') - 1| for affine runs
  double max_drift = 0.0;
};

class Trajectory {
 public:
  Trajectory(MechanicalSystem system, Parametrization kind)
      : system_(std::move(system)), kind_(kind) {}

  const MechanicalSystem& system() const { return system_; }
  Parametrization kind() const { return kind_; }
  const std::vector<TrajectorySample>& samples() const { return samples_; }
  const std::vector<OdeStep>& segments() const { return segments_; }
  const IntegratorInfo& info() const { return info_; }
  IntegratorInfo& info() { return info_; }
  Termination termination() const { return termination_; }
  const std::string& message() const { return message_; }
  int dimension() const { return system_.dimension(); }
  bool empty() const { return samples_.empty(); }
  double front_param() const { return samples_.front().param; }
  double back_param() const { return samples_.back().param; }

  void push(TrajectorySample s) {
    if (!samples_.empty() && !(s.param > samples_.back().param))
      throw NumericalError("trajectory: evolution parameter must increase strictly");
    samples_.push_back(std::move(s));
  }
  void push_segment(OdeStep step) { segments_.push_back(std::move(step)); }
  void finish(Termination t, std::string message = {}) {
    termination_ = t;
    message_ = std::move(message);
  }

  /// Energy carried by a sample, computed from the state.
  double energy(const TrajectorySample& s) const {
    const Matrix g = system_.metric().at(s.q);
    const double V = system_.potential().value(s.q);
    const double gvv = s.v.dot(g * s.v);
    if (kind_ == Parametrization::time) return 0.5 * gvv + V;
    const double b = system_.energy() - V;
    return 2.0 * b * b * gvv + V;
  }

  struct Point {
    Vector q, v, dq;  // position, stored velocity, derivative of the position interpolant
  };

  /// Interpolated state. Uses the integrator's dense output when available and a
  /// cubic Hermite interpolant of the samples otherwise.
  Point at(double param) const {
    if (samples_.empty()) throw NumericalError("trajectory: no samples");
    if (param < front_param() || param > back_param())
      throw DomainError("trajectory: parameter outside the integrated range");
    const int k = dimension();
    const auto i = segment_index(param);
    if (!segments_.empty()) {
      const OdeStep& st = segments_[i];
      const Vector y = st.at(param), dy = st.derivative(param);
      return {y.head(k), y.tail(k), dy.head(k)};
    }
    if (samples_.size() == 1) return {samples_[0].q, samples_[0].v, samples_[0].v};
    const auto& a = samples_[i];
    const auto& b = samples_[i + 1];
    const double h = b.param - a.param;
    const double s = (param - a.param) / h;
    const double h00 = 2 * s * s * s - 3 * s * s + 1, h10 = s * s * s - 2 * s * s + s;
    const double h01 = -2 * s * s * s + 3 * s * s, h11 = s * s * s - s * s;
    const double d00 = (6 * s * s - 6 * s) / h, d10 = 3 * s * s - 4 * s + 1;
    const double d01 = (-6 * s * s + 6 * s) / h, d11 = 3 * s * s - 2 * s;
    Point p;
    p.q = h00 * a.q + h10 * h * a.v + h01 * b.q + h11 * h * b.v;
    p.dq = d00 * a.q + d10 * a.v + d01 * b.q + d11 * b.v;
    p.v = (1 - s) * a.v + s * b.v;
    return p;
  }

  /// Index i of the interval [param_i, param_{i+1}] containing param.
  std::size_t segment_index(double param) const {
    if (samples_.size() < 2) return 0;
    auto it = std::upper_bound(samples_.begin(), samples_.end(), param,
                               [](double p, const TrajectorySample& s) { return p < s.param; });
    auto i = static_cast<std::size_t>(std::distance(samples_.begin(), it));
    return std::clamp<std::size_t>(i == 0 ? 0 : i - 1, 0, samples_.size() - 2);
  }

 private:
  MechanicalSystem system_;
  Parametrization kind_;
  std::vector<TrajectorySample> samples_;
  std::vector<OdeStep> segments_;
  IntegratorInfo info_;
  Termination termination_ = Termination::completed;
  std::string message_;
};

struct DynamicsOptions {
  double tol = 1e-10;
  // halt when E - V < epsilon_stop * max(|E|, 1); disabled when unset
  std::optional<double> epsilon_stop = 1e-8;
  FiniteDifference fd{1e-4, 4};  // Christoffels of h
  double max_step = std::numeric_limits<double>::infinity();
};

namespace detail {

inline double stop_threshold(const MechanicalSystem& s, const DynamicsOptions& opt) {
  return *opt.epsilon_stop * std::max(std::abs(s.energy()), 1.0);
}

inline double contract(const Matrix& gamma, const Vector& v) { return v.dot(gamma * v); }

template <typename Rhs, typename Drift>
Trajectory run(const MechanicalSystem& system, Parametrization kind, const std::string& method,
               const Vector& q0, const Vector& v0, double p0, double p_end,
               const DynamicsOptions& opt, const Rhs& rhs, const Drift& drift) {
  const int k = system.dimension();
  Trajectory traj(system, kind);
  traj.info().method = method;
  traj.info().rel_tol = traj.info().abs_tol = opt.tol;
  traj.push({p0, q0, v0});
  Vector y(2 * k);
  y << q0, v0;
  OdeOptions ode;
  ode.rel_tol = ode.abs_tol = opt.tol;
  ode.max_step = opt.max_step;
  bool hit_boundary = false;
  const double threshold = opt.epsilon_stop ? stop_threshold(system, opt) : 0.0;
  if (opt.epsilon_stop && system.kinetic_budget(q0) < threshold)
    throw DomainError("integration: initial point lies within the boundary guard");
  auto budget_at = [&](const OdeStep& step, double t) {
    return system.kinetic_budget(step.at(t).head(k));
  };
  // first parameter in the step where E - V drops below the guard, if any
  auto boundary_crossing = [&](const OdeStep& step) -> std::optional<double> {
    constexpr int n = 16;
    double t_min = step.t1, b_min = budget_at(step, step.t1);
    for (int i = 1; i < n; ++i) {
      const double t = step.t0 + (step.t1 - step.t0) * i / n;
      const double b = budget_at(step, t);
      if (b < b_min) b_min = b, t_min = t;
    }
    // golden-section refinement of an interior minimum (tangential approach)
    const double h = (step.t1 - step.t0) / n;
    double lo = std::max(step.t0, t_min - h), hi = std::min(step.t1, t_min + h);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 60 && b_min >= threshold; ++it) {
      const double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
      const double b1 = budget_at(step, x1), b2 = budget_at(step, x2);
      if (b1 < b2) {
        hi = x2;
        if (b1 < b_min) b_min = b1, t_min = x1;
      } else {
        lo = x1;
        if (b2 < b_min) b_min = b2, t_min = x2;
      }
    }
    if (b_min >= threshold) return std::nullopt;
    double a = step.t0, b = t_min;
    for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(b)); ++it) {
      const double mid = 0.5 * (a + b);
      (budget_at(step, mid) >= threshold ? a : b) = mid;
    }
    return a;
  };
  auto observer = [&](const OdeStep& step) {
    std::optional<double> stop;
    if (opt.epsilon_stop) stop = boundary_crossing(step);
    TrajectorySample s{step.t1, step.y1.head(k), step.y1.tail(k)};
    if (stop) {
      hit_boundary = true;
      if (!(*stop > step.t0)) return false;
      const Vector y = step.at(*stop);
      s = {*stop, y.head(k), y.tail(k)};
    }
    traj.info().max_drift = std::max(traj.info().max_drift, drift(s));
    traj.push(s);
    traj.push_segment(step);
    return !hit_boundary;
  };
  const OdeSummary summary = integrate_dopri5(rhs, p0, y, p_end, ode, observer);
  traj.info().accepted = summary.accepted;
  traj.info().rejected = summary.rejected;
  if (hit_boundary)
    traj.finish(Termination::boundary, "stopped at the boundary guard E - V < epsilon_stop");
  else if (summary.status == OdeStatus::step_underflow)
    throw NumericalError("integration: " + summary.message + " at parameter " +
                         format_number(summary.t_final));
  return traj;
}

}  // namespace detail

/// q'' + Gamma(q', q') + g^{-1} grad V = 0 in coordinate time.
inline Trajectory integrate_newton(const MechanicalSystem& system, const NewtonianState& initial,
                                   double t_end, const DynamicsOptions& opt = {}) {
  const int k = system.dimension();
  require_dimension(initial.q.size(), k, "integrate_newton q");
  require_dimension(initial.qdot.size(), k, "integrate_newton qdot");
  if (!(t_end >= initial.t)) throw DomainError("integrate_newton: t_end precedes the initial time");
  const double budget = system.kinetic_budget(initial.q);
  if (opt.epsilon_stop ? !(budget > 0) : budget < -1e-12 * std::max(1.0, std::abs(system.energy())))
    throw DomainError("integrate_newton: initial point is outside the allowed region");

  const auto& metric = system.metric();
  const auto& potential = system.potential();
  auto rhs = [&](double, const Vector& y, Vector& dy) {
    const Vector q = y.head(k), v = y.tail(k);
    const auto gamma = metric.christoffel(q);
    const Vector force = metric.at(q).llt().solve(potential.gradient(q));
    dy.head(k) = v;
    for (int a = 0; a < k; ++a) dy[k + a] = -detail::contract(gamma[a], v) - force[a];
  };
  const double e0 = 0.5 * initial.qdot.dot(metric.at(initial.q) * initial.qdot) +
                    potential.value(initial.q);
  const double scale = std::max(std::abs(e0), 1e-300);
  auto drift = [&](const TrajectorySample& s) {
    return std::abs(0.5 * s.v.dot(metric.at(s.q) * s.v) + potential.value(s.q) - e0) / scale;
  };
  return detail::run(system, Parametrization::time, "dopri5/newton", initial.q, initial.qdot,
                     initial.t, t_end, opt, rhs, drift);
}

/// h = 2(E - V) g at q.
inline Matrix jacobi_metric_matrix(const MechanicalSystem& system, const Vector& q) {
  const double b = system.kinetic_budget(q);
  if (!(b > 0)) throw DomainError("jacobi metric: point outside the allowed region");
  return 2.0 * b * system.metric().at(q);
}

/// Christoffel symbols of h from finite differences of its components.
inline std::vector<Matrix> jacobi_christoffel(const MechanicalSystem& system, const Vector& q,
                                              const FiniteDifference& fd) {
  const int k = system.dimension();
  std::vector<Matrix> dh(k);
  for (int mu = 0; mu < k; ++mu)
    dh[mu] = partial([&](const Vector& x) { return jacobi_metric_matrix(system, x); }, q, mu, fd);
  return KineticMetric::christoffel_from(jacobi_metric_matrix(system, q), dh);
}

/// Geodesic of the Jacobi metric. The initial direction is rescaled to unit h-speed.
inline Trajectory integrate_geodesic(const MechanicalSystem& system, const GeodesicState& initial,
                                     double s_end, const DynamicsOptions& opt = {}) {
  const int k = system.dimension();
  require_dimension(initial.q.size(), k, "integrate_geodesic q");
  require_dimension(initial.qprime.size(), k, "integrate_geodesic qprime");
  if (!(s_end >= initial.stilde))
    throw DomainError("integrate_geodesic: s_end precedes the initial parameter");
  const Matrix h0 = jacobi_metric_matrix(system, initial.q);
  const double speed2 = initial.qprime.dot(h0 * initial.qprime);
  if (!(speed2 > 0)) throw DomainError("integrate_geodesic: initial direction has zero length");
  const Vector v0 = initial.qprime / std::sqrt(speed2);

  auto rhs = [&](double, const Vector& y, Vector& dy) {
    const Vector q = y.head(k), v = y.tail(k);
    const auto gamma = jacobi_christoffel(system, q, opt.fd);
    dy.head(k) = v;
    for (int a = 0; a < k; ++a) dy[k + a] = -detail::contract(gamma[a], v);
  };
  auto drift = [&](const TrajectorySample& s) {
    return std::abs(s.v.dot(jacobi_metric_matrix(system, s.q) * s.v) - 1.0);
  };
  return detail::run(system, Parametrization::affine, "dopri5/jacobi-geodesic", initial.q, v0,
                     initial.stilde, s_end, opt, rhs, drift);
}

enum class Reparametrization { t_to_stilde, stilde_to_t };

/// Maps time to the affine parameter (ds~ = 2(E - V) dt) or back. Increments are
/// Gauss-Legendre integrals over the dense output when the trajectory carries one,
/// and a quintic Hermite rule over the samples otherwise.
inline Trajectory reparametrize(const Trajectory& traj, Reparametrization direction,
                                std::optional<double> epsilon = std::nullopt) {
  const bool forward = direction == Reparametrization::t_to_stilde;
  if (forward != (traj.kind() == Parametrization::time))
    throw DomainError("reparametrize: trajectory is not in the source parametrization");
  const auto& system = traj.system();
  const double E = system.energy();
  const double eps = epsilon.value_or(1e-8 * std::max(std::abs(E), 1.0));
  for (const auto& s : traj.samples())
    if (!(system.kinetic_budget(s.q) > eps))
      throw DomainError("reparametrize: sample at parameter " + format_number(s.param) +
                        " violates E - V > epsilon");

  // rate f = ds_out/ds_in and its first two derivatives along the path, from
  // b = E - V: b' = -dV.v, b'' = -(v.H.v + dV.a)
  struct Rate {
    double f, df, d2f;
  };
  const auto k = traj.dimension();
  auto rate = [&](const Vector& q, const Vector& v, bool derivatives) {
    const double b = system.kinetic_budget(q);
    if (!derivatives) return Rate{forward ? 2.0 * b : 1.0 / (2.0 * b), 0, 0};
    const Vector dV = system.potential().gradient(q);
    Vector a(k);
    if (forward) {
      const auto gamma = system.metric().christoffel(q);
      const Vector force = system.metric().at(q).llt().solve(dV);
      for (int i = 0; i < k; ++i) a[i] = -detail::contract(gamma[i], v) - force[i];
    } else {
      const auto gamma = jacobi_christoffel(system, q, DynamicsOptions{}.fd);
      for (int i = 0; i < k; ++i) a[i] = -detail::contract(gamma[i], v);
    }
    const double db = -dV.dot(v);
    const double d2b = -(v.dot(system.potential().hessian(q) * v) + dV.dot(a));
    if (forward) return Rate{2.0 * b, 2.0 * db, 2.0 * d2b};
    return Rate{1.0 / (2.0 * b), -db / (2.0 * b * b), -d2b / (2.0 * b * b) + db * db / (b * b * b)};
  };

  Trajectory out(system, forward ? Parametrization::affine : Parametrization::time);
  out.info() = traj.info();
  out.info().method += forward ? "+t_to_stilde" : "+stilde_to_t";
  const auto& samples = traj.samples();
  const auto& rule = gauss_legendre(12);
  double acc = samples.front().param;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (i > 0) {
      const auto& a = samples[i - 1];
      const double h = s.param - a.param;
      if (!traj.segments().empty()) {
        const OdeStep& st = traj.segments()[i - 1];
        std::array<double, 12> terms{};
        for (int j = 0; j < 12; ++j) {
          const double p = a.param + 0.5 * h * (1.0 + rule.nodes[j]);
          const Vector y = st.at(p);
          terms[j] = rule.weights[j] * rate(y.head(k), y.tail(k), false).f;
        }
        acc += 0.5 * h * pairwise_sum(terms);
      } else {
        // quintic Hermite rule from f, f', f'' at both ends
        const Rate ra = rate(a.q, a.v, true), rb = rate(s.q, s.v, true);
        acc += 0.5 * h * (ra.f + rb.f) + h * h / 10.0 * (ra.df - rb.df) +
               h * h * h / 120.0 * (ra.d2f + rb.d2f);
      }
    }
    out.push({acc, s.q, s.v / rate(s.q, s.v, false).f});
  }
  return out;
}

struct ActionEvaluations {
  double p_dq = 0.0;        // integral of p_a dq^a along the path
  double two_t_dt = 0.0;    // integral of g(qdot, qdot) dt
  double sqrt_2t_ds = 0.0;  // integral of sqrt(2(E - V)) |dq|_g
};

/// The reduced action evaluated three ways over the trajectory.
inline ActionEvaluations maupertuis_action(const Trajectory& traj) {
  if (traj.kind() != Parametrization::time)
    throw DomainError("maupertuis_action: trajectory must be time-parametrized");
  ActionEvaluations out;
  const auto& samples = traj.samples();
  if (samples.size() < 2) return out;
  const auto& system = traj.system();
  const auto& rule = gauss_legendre(16);
  std::vector<double> pdq, ttdt, sds;
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    const double a = samples[i].param, b = samples[i + 1].param;
    for (int j = 0; j < 16; ++j) {
      const double t = 0.5 * (a + b) + 0.5 * (b - a) * rule.nodes[j];
      const double w = 0.5 * (b - a) * rule.weights[j];
      const auto pt = traj.at(t);
      const Matrix g = system.metric().at(pt.q);
      const Vector p = g * pt.v;
      pdq.push_back(w * p.dot(pt.dq));
      ttdt.push_back(w * pt.v.dot(g * pt.v));
      const double budget = std::max(0.0, system.kinetic_budget(pt.q));
      sds.push_back(w * std::sqrt(2.0 * budget) * std::sqrt(pt.dq.dot(g * pt.dq)));
    }
  }
  out.p_dq = pairwise_sum(pdq);
  out.two_t_dt = pairwise_sum(ttdt);
  out.sqrt_2t_ds = pairwise_sum(sds);
  return out;
}

struct VariationReport {
  double base_length = 0.0;       // Jacobi length of the trajectory
  double perturbed_length = 0.0;  // Jacobi length of the perturbed path
  double delta = 0.0;             // perturbed - base
  double ratio = 0.0;             // |delta| / a^2
};

/// Compares the Jacobi length of the path with that of the endpoint-fixed path
/// q + a sin(pi tau) n, n a unit vector transverse to the chord.
inline VariationReport first_variation_check(const MechanicalSystem& system, const Trajectory& traj,
                                             double amplitude) {
  if (!(amplitude > 0)) throw DomainError("first_variation_check: amplitude must be positive");
  if (traj.samples().size() < 2)
    throw DomainError("first_variation_check: trajectory needs at least two samples");
  const int k = system.dimension();
  const auto& samples = traj.samples();
  const double p0 = traj.front_param(), p1 = traj.back_param();
  Vector n = Vector::Zero(k);
  if (k == 1) {
    n[0] = 1.0;
  } else {
    Vector d = samples.back().q - samples.front().q;
    if (d.norm() < 1e-12) d = samples.front().v;
    d.normalize();
    for (int axis = 0; axis < k; ++axis) {
      Vector e = Vector::Unit(k, axis);
      e -= e.dot(d) * d;
      if (e.norm() > n.norm()) n = e;
    }
    n.normalize();
  }

  const auto& rule = gauss_legendre(16);
  auto length = [&](double a) {
    std::vector<double> terms;
    for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
      const double lo = samples[i].param, hi = samples[i + 1].param;
      for (int j = 0; j < 16; ++j) {
        const double p = 0.5 * (lo + hi) + 0.5 * (hi - lo) * rule.nodes[j];
        const double w = 0.5 * (hi - lo) * rule.weights[j];
        const auto pt = traj.at(p);
        const double tau = (p - p0) / (p1 - p0);
        const Vector q = pt.q + a * std::sin(std::numbers::pi * tau) * n;
        const Vector dq =
            pt.dq + a * std::numbers::pi / (p1 - p0) * std::cos(std::numbers::pi * tau) * n;
        const double b = system.kinetic_budget(q);
        if (!(b > 0)) throw DomainError("first_variation_check: perturbed path leaves the allowed region");
        terms.push_back(w * std::sqrt(2.0 * b * dq.dot(system.metric().at(q) * dq)));
      }
    }
    return pairwise_sum(terms);
  };
  VariationReport r;
  r.base_length = length(0.0);
  r.perturbed_length = length(amplitude);
  r.delta = r.perturbed_length - r.base_length;
  r.ratio = std::abs(r.delta) / (amplitude * amplitude);
  return r;
}

struct EquivalenceReport {
  double max_distance = 0.0;  // max |q_geodesic(s~(t)) - q_newton(t)| over compared samples
  int compared = 0;
  double s_end = 0.0;
};

/// Integrates both formulations from the same initial point and direction and
/// compares configurations at the Newtonian samples with E - V > margin |E|.
inline EquivalenceReport compare_formulations(const MechanicalSystem& system,
                                              const NewtonianState& initial, double t_end,
                                              const DynamicsOptions& opt = {},
                                              double margin = 0.05) {
  const Trajectory newton = integrate_newton(system, initial, t_end, opt);
  const Trajectory mapped = reparametrize(newton, Reparametrization::t_to_stilde);
  EquivalenceReport report;
  report.s_end = mapped.back_param();
  const Trajectory geodesic =
      integrate_geodesic(system, {initial.q, initial.qdot, mapped.front_param()}, report.s_end, opt);
  const double threshold = margin * std::abs(system.energy());
  for (const auto& s : mapped.samples()) {
    if (s.param > geodesic.back_param()) break;
    if (!(system.kinetic_budget(s.q) > threshold)) continue;
    const double d = (geodesic.at(s.param).q - s.q).norm();
    report.max_distance = std::max(report.max_distance, d);
    ++report.compared;
  }
  return report;
}

/// Columns: param,q1..qk,v1..vk,energy
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  CsvWriter csv(out);
  const int k = traj.dimension();
  std::vector<std::string> cols{"param"};
  for (int i = 1; i <= k; ++i) cols.push_back("q" + std::to_string(i));
  for (int i = 1; i <= k; ++i) cols.push_back("v" + std::to_string(i));
  cols.push_back("energy");
  csv.header(cols);
  for (const auto& s : traj.samples()) {
    std::vector<double> row{s.param};
    for (int i = 0; i < k; ++i) row.push_back(s.q[i]);
    for (int i = 0; i < k; ++i) row.push_back(s.v[i]);
    row.push_back(traj.energy(s));
    csv.row(row);
  }
}

}  // namespace topospec
