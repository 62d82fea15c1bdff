#pragma once

// Built-in reproduction suite: nine numbered checks with pinned tolerances,
// shared by the `check` command and the acceptance binary.

#include "topospec/characteristic_classes.hpp"
#include "topospec/dynamics.hpp"
#include "topospec/jacobi_geometry.hpp"
#include "topospec/spectra.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace topospec {

struct Measurement {
  std::string label;
  double value;      // measured error or runtime
  double tolerance;  // pass requires value < tolerance
};

struct CriterionResult {
  int id = 0;
  std::string name;
  std::vector<Measurement> measurements;
  std::string note;
  double seconds = 0;
  bool pass = false;
};

namespace reproduction {

using Clock = std::chrono::steady_clock;

inline Vector point(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// Uniform sample of the box [-2, 2]^k with E - V >= margin |E| and |q| >= min_radius.
inline Vector interior_point(const MechanicalSystem& s, std::mt19937_64& rng, double margin = 0.2,
                             double min_radius = 0.0) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (;;) {
    Vector q(s.dimension());
    for (auto& x : q) x = u(rng);
    if (q.norm() >= min_radius && sigma_contains(s, q) &&
        s.kinetic_budget(q) >= margin * std::abs(s.energy()))
      return q;
  }
}

// Independent root of E - l^2/(2 m r^2) + alpha/r by bisection.
inline double bisect_energy_equation(double m, double alpha, double l, double E, double lo,
                                     double hi) {
  auto f = [&](double r) { return E - l * l / (2 * m * r * r) + alpha / r; };
  const bool lo_positive = f(lo) > 0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if ((f(mid) > 0) == lo_positive)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

inline double relative(double a, double b) { return std::abs(a - b) / std::abs(b); }

inline void reduced_oscillator(CriterionResult& c) {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> uk(0.2, 5.0), ue(0.1, 5.0), uf(0.05, 0.95);
  QuadratureOptions opt;
  opt.abs_tol = 1e-14;
  opt.rel_tol = 1e-13;
  double worst = 0;
  for (int i = 0; i < 20; ++i) {
    const double k = uk(rng), E = ue(rng);
    const double q0 = uf(rng) * std::sqrt(2 * E / k);
    const auto num = integrate_ho_reduced(k, E, q0, std::numbers::pi, opt);
    worst = std::max(worst, relative(num.value, euler_integral_ho_reduced(k, E, q0)));
  }
  c.measurements.push_back({"max relative error (20 cases)", worst, 1e-8});
}

inline void canonical_spectrum(CriterionResult& c) {
  double worst = 0, energy_mismatch = 0;
  for (int n = 1; n <= 10; ++n) {
    const auto p = ho_canonical_map(n, 1, 1, 1);
    worst = std::max(worst, std::abs(ho_topological_spectrum(p.k_spring, p.energy, p.q0) - n));
    if (p.energy != n + 0.5) energy_mismatch = std::max(energy_mismatch, std::abs(p.energy - n - 0.5) + 1);
  }
  c.measurements.push_back({"max |f - n| (n = 1..10)", worst, 1e-10});
  c.measurements.push_back({"E = n + 1/2 mismatches", energy_mismatch, 0.5});
}

inline void apsidal_radii(CriterionResult& c) {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> um(0.5, 3), ua(0.5, 3), ue(0.1, 2), ux(0.02, 0.98);
  double worst = 0;
  for (int i = 0; i < 50; ++i) {
    const double m = um(rng), alpha = ua(rng), E = -ue(rng), x = ux(rng);
    const double l = std::sqrt(x * m * alpha * alpha / (2 * std::abs(E)));
    const auto a = kepler_apsidal(m, alpha, l, E);
    const double r_circ = l * l / (m * alpha);
    const double rm = bisect_energy_equation(m, alpha, l, E, 1e-8 * r_circ, r_circ);
    const double rp = bisect_energy_equation(m, alpha, l, E, r_circ, alpha / std::abs(E));
    worst = std::max({worst, relative(a.r_minus, rm), relative(a.r_plus, rp)});
  }
  const auto ex = kepler_apsidal(1, 1, 0.6, -0.5);
  c.measurements.push_back({"max relative error vs bisection (50 cases)", worst, 1e-9});
  c.measurements.push_back(
      {"|r- - 0.2| + |r+ - 1.8| at (1, 1, 0.6, -0.5)",
       std::abs(ex.r_minus - 0.2) + std::abs(ex.r_plus - 1.8), 1e-12});
}

inline void kepler_annulus(CriterionResult& c) {
  const double m = 1, alpha = 1, l = 0.6, E = -0.5;
  const auto radii = kepler_apsidal(m, alpha, l, E);
  const MechanicalSystem sys(KineticMetric::cartesian(m, 2), PotentialField::kepler(alpha, 2), E);
  RegularizedDomain d{AnnulusRegion{radii.r_minus, radii.r_plus}};
  d.inset = 1e-3;
  d.extrapolate = true;
  d.quadrature.abs_tol = d.quadrature.rel_tol = 1e-12;
  const auto rep = integrate_euler(sys, d);
  const auto ks = kepler_spectrum(m, alpha, l, E);
  const double closed = -2 * std::sqrt(1 - radii.x) / radii.x;
  c.measurements.push_back({"relative error vs -2 sqrt(1-x)/x", rep.converged ? relative(rep.value, closed)
                                                                              : HUGE_VAL, 1e-5});
  c.note = "x = " + format_number(radii.x) + ", quadrature " + format_number(rep.value) +
           ", boundary term " + format_number(ks.boundary_term_value) +
           ", printed closed form -x/sqrt(1-x) = " + format_number(ks.printed_value) + " (" +
           rep.verdict + ")";
}

inline void dynamical_equivalence(CriterionResult& c) {
  const DynamicsOptions opt{1e-12};
  const double pi = std::numbers::pi;
  const MechanicalSystem ho(KineticMetric::cartesian(1, 2), PotentialField::harmonic({1.0, 0.0}), 0.5);
  const MechanicalSystem kepler(KineticMetric::cartesian(1, 2), PotentialField::kepler(1.0, 2), -0.5);
  const auto a = compare_formulations(ho, {point({0, 0}), point({1, 0}), 0}, 1.2, opt);
  const auto b = compare_formulations(kepler, {point({1, 0}), point({0, 1}), 0}, 2 * pi, opt);
  // l = 0.6 from the perihelion r = 0.2 (x = 0.36)
  const auto e = compare_formulations(kepler, {point({0.2, 0}), point({0, 3}), 0}, 2 * pi, opt);
  c.measurements.push_back({"oscillator max distance", a.compared > 0 ? a.max_distance : HUGE_VAL, 1e-6});
  c.measurements.push_back({"kepler circular max distance", b.compared > 0 ? b.max_distance : HUGE_VAL, 1e-6});
  c.measurements.push_back({"kepler eccentric max distance", e.compared > 0 ? e.max_distance : HUGE_VAL, 1e-6});
  c.note = "compared samples: " + std::to_string(a.compared) + ", " + std::to_string(b.compared) +
           ", " + std::to_string(e.compared);
}

inline void structure_equations(CriterionResult& c) {
  std::mt19937_64 rng(606);
  struct Case {
    std::string label;
    MechanicalSystem system;
    double min_radius;
  };
  const std::vector<Case> cases = {
      {"oscillator (1, 0)",
       {KineticMetric::cartesian(1, 2), PotentialField::harmonic({1.0, 0.0}), 1.0}, 0.0},
      {"anisotropic oscillator",
       {KineticMetric::cartesian(1.7, 2), PotentialField::harmonic({1.3, 0.6}), 2.0}, 0.0},
      {"kepler", {KineticMetric::cartesian(1, 2), PotentialField::kepler(1.0, 2), -0.5}, 0.3},
      {"3-d oscillator",
       {KineticMetric::cartesian(1, 3), PotentialField::harmonic({1, 2, 3}), 2.0}, 0.0},
  };
  for (const auto& cs : cases) {
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
      const auto res = structure_residual(cs.system, interior_point(cs.system, rng, 0.2, cs.min_radius));
      worst = std::max({worst, res.first, res.second});
    }
    c.measurements.push_back({cs.label + " max residual (100 points)", worst, 1e-6});
  }
}

inline void transformation_law(CriterionResult& c) {
  std::mt19937_64 rng(7070);
  double conj = 0, round_trip = 0, cocycle = 0;
  for (int k : {2, 3}) {
    std::vector<double> springs;
    for (int i = 0; i < k; ++i) springs.push_back(1.0 + 0.5 * i);
    auto s = std::make_shared<const MechanicalSystem>(KineticMetric::cartesian(1.0, k),
                                                      PotentialField::harmonic(springs), 2.0);
    const CoframeField base = natural_coframe_field(s);
    for (int trial = 0; trial < 10; ++trial) {
      const Vector q = interior_point(*s, rng);
      const auto L = FrameRotation::random(k, rng);
      // Cartan solve in the rotated frame against R' = L R L^-1
      const CoframeField rotated = [&](const Vector& x) {
        CoframeJet j = base(x);
        j.frame = L.matrix() * j.frame;
        for (auto& d : j.d) d = L.matrix() * d;
        return j;
      };
      const auto expected = transform_frame(cartan_curvature(base, q), L);
      const auto actual = cartan_curvature(rotated, q);
      for (int i = 0; i < k * k; ++i)
        conj = std::max(conj, (expected.coord[i] - actual.coord[i]).cwiseAbs().maxCoeff());

      const auto w = conformal_connection(*s, q);
      const auto back = transform_frame(transform_frame(w, L), L.inverse());
      for (int mu = 0; mu < k; ++mu)
        round_trip = std::max(round_trip, (back.coord[mu] - w.coord[mu]).cwiseAbs().maxCoeff());

      const Matrix lik = FrameRotation::random(k, rng).matrix();
      const Matrix lkj = FrameRotation::random(k, rng).matrix();
      cocycle = std::max(cocycle, check_cocycle({{{0, 1}, lik}, {{1, 2}, lkj}, {{0, 2}, lik * lkj}})
                                      .max_defect);
    }
  }
  c.measurements.push_back({"curvature conjugation covariance", conj, 1e-10});
  c.measurements.push_back({"connection round trip", round_trip, 1e-10});
  c.measurements.push_back({"cocycle defect", cocycle, 1e-10});
}

inline void conservation_and_action(CriterionResult& c) {
  const double pi = std::numbers::pi;
  const double k = 1, m = 1, E = 0.5, omega = std::sqrt(k / m);
  const MechanicalSystem ho(KineticMetric::cartesian(m, 1), PotentialField::harmonic({k}), E);
  DynamicsOptions opt{1e-10};
  opt.epsilon_stop.reset();
  const auto traj = integrate_newton(ho, {point({0}), point({1}), 0}, 2 * pi / omega, opt);
  const auto a = maupertuis_action(traj);
  const double spread = std::max({relative(a.two_t_dt, a.p_dq), relative(a.sqrt_2t_ds, a.p_dq),
                                  relative(a.sqrt_2t_ds, a.two_t_dt)});
  const double ellipse = 2 * pi * E / omega;
  c.measurements.push_back({"relative energy drift over one period", traj.info().max_drift, 1e-8});
  c.measurements.push_back({"action evaluations spread", spread, 1e-6});
  c.measurements.push_back({"action vs 2 pi E / omega",
                            std::max({relative(a.p_dq, ellipse), relative(a.two_t_dt, ellipse),
                                      relative(a.sqrt_2t_ds, ellipse)}),
                            1e-6});
}

inline void free_flatness(CriterionResult& c) {
  double curvature = 0, density = 0;
  for (int k : {2, 3, 4}) {
    const MechanicalSystem s(KineticMetric::cartesian(1.3, k), PotentialField::free(k), 0.7);
    for (Branch branch : {Branch::analytic, Branch::numeric}) {
      const int n = k == 4 ? 4 : 7;
      std::vector<int> idx(k, 0);
      for (;;) {
        Vector q(k);
        for (int i = 0; i < k; ++i) q[i] = -1.5 + 3.0 * idx[i] / (n - 1);
        const auto r = curvature_two_form(s, q, branch);
        curvature = std::max(curvature, r.max_abs());
        if (k % 2 == 0) density = std::max(density, std::abs(euler_density(r)));
        int i = 0;
        while (i < k && ++idx[i] == n) idx[i++] = 0;
        if (i == k) break;
      }
    }
  }
  c.measurements.push_back({"max |R| on grid (k = 2, 3, 4)", curvature, 1e-12});
  c.measurements.push_back({"max |e| on grid (k = 2, 4)", density, 1e-12});
}

}  // namespace reproduction

struct CriterionSpec {
  int id;
  std::string name;
  double time_limit;  // seconds; infinity when none is pinned
  std::function<void(CriterionResult&)> body;
};

inline std::vector<CriterionSpec> reproduction_criteria() {
  namespace r = reproduction;
  const double none = HUGE_VAL;
  return {
      {1, "reduced oscillator Euler integral", 1.0, r::reduced_oscillator},
      {2, "canonical spectrum recovery", 0.1, r::canonical_spectrum},
      {3, "kepler apsidal radii", none, r::apsidal_radii},
      {4, "kepler annulus Euler integral", 5.0, r::kepler_annulus},
      {5, "geodesic / newtonian equivalence", 10.0, r::dynamical_equivalence},
      {6, "structure-equation residual", none, r::structure_equations},
      {7, "frame transformation and cocycle", none, r::transformation_law},
      {8, "energy conservation and action", none, r::conservation_and_action},
      {9, "free-particle flatness", none, r::free_flatness},
  };
}

/// Runs one criterion. Exceptions are caught and reported as failures.
inline CriterionResult run_criterion(const CriterionSpec& spec) {
  CriterionResult c;
  c.id = spec.id;
  c.name = spec.name;
  const auto start = reproduction::Clock::now();
  try {
    spec.body(c);
  } catch (const std::exception& e) {
    c.note = std::string("error: ") + e.what();
    c.measurements.push_back({"completed", 1, 0});
  }
  c.seconds = std::chrono::duration<double>(reproduction::Clock::now() - start).count();
  if (std::isfinite(spec.time_limit)) c.measurements.push_back({"runtime [s]", c.seconds, spec.time_limit});
  c.pass = !c.measurements.empty();
  for (const auto& m : c.measurements)
    if (!(m.value < m.tolerance)) c.pass = false;
  return c;
}

inline std::vector<CriterionResult> run_reproduction_suite() {
  std::vector<CriterionResult> out;
  for (const auto& spec : reproduction_criteria()) out.push_back(run_criterion(spec));
  return out;
}

/// One summary line per criterion plus indented measurement lines.
inline void print_criterion(std::ostream& out, const CriterionResult& c, bool details = true) {
  char head[160];
  std::snprintf(head, sizeof head, "%s  criterion %d  %-36s %8.3f s", c.pass ? "PASS" : "FAIL", c.id,
                c.name.c_str(), c.seconds);
  out << head << '\n';
  if (!details) return;
  for (const auto& m : c.measurements) {
    char line[200];
    std::snprintf(line, sizeof line, "      %-46s %.3e  (< %.1e)", m.label.c_str(), m.value,
                  m.tolerance);
    out << line << '\n';
  }
  if (!c.note.empty()) out << "      " << c.note << '\n';
}

/// Columns: criterion,name,measurement,value,tolerance,pass. Runtimes are left out so
/// that the table is reproducible.
inline void write_check_csv(std::ostream& out, const std::vector<CriterionResult>& results) {
  CsvWriter csv(out);
  csv.header({"criterion", "name", "measurement", "value", "tolerance", "pass"});
  for (const auto& c : results)
    for (const auto& m : c.measurements) {
      if (m.label == "runtime [s]") continue;
      csv.row_strings({std::to_string(c.id), c.name, m.label, format_number(m.value),
                       format_number(m.tolerance), m.value < m.tolerance ? "1" : "0"});
    }
}

}  // namespace topospec
