#include "topospec/dynamics.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace topospec;
using topospec::fixtures::vec;

namespace {

const double pi = std::numbers::pi;

DynamicsOptions no_guard(double tol = 1e-10) {
  DynamicsOptions opt;
  opt.tol = tol;
  opt.epsilon_stop.reset();
  return opt;
}

}  // namespace

TEST(Newton, FreeParticleIsStraightLine) {
  const auto sys = fixtures::free_system(2, 0.5 * (0.36 + 0.64));
  const Vector q0 = vec({0.3, -1.0}), v0 = vec({0.6, 0.8});
  const auto traj = integrate_newton(sys, {q0, v0, 0.0}, 5.0);
  for (const auto& s : traj.samples()) {
    EXPECT_LT((s.q - (q0 + v0 * s.param)).norm(), 1e-10);
    EXPECT_LT((s.v - v0).norm(), 1e-12);
  }
  EXPECT_DOUBLE_EQ(traj.back_param(), 5.0);
}

TEST(Newton, HarmonicCosine) {
  const auto sys = fixtures::harmonic_system({1.0}, 0.5);
  const auto traj = integrate_newton(sys, {vec({1.0}), vec({0.0}), 0.0}, pi, no_guard());
  EXPECT_NEAR(traj.samples().back().q[0], -1.0, 1e-8);
  for (const auto& s : traj.samples()) EXPECT_NEAR(s.q[0], std::cos(s.param), 1e-8);
  EXPECT_NEAR(traj.at(1.0).q[0], std::cos(1.0), 1e-8);
}

TEST(Newton, StartingOnTheBoundaryNeedsTheGuardDisabled) {
  const auto sys = fixtures::harmonic_system({1.0}, 0.5);
  EXPECT_THROW(integrate_newton(sys, {vec({1.0}), vec({0.0}), 0.0}, pi), DomainError);
}

TEST(Newton, KeplerCircularOrbitKeepsRadius) {
  // m = alpha = l = 1: r = l^2/(m alpha) = 1, speed l/(m r) = 1, E = -1/2, period 2 pi
  const auto cart = fixtures::kepler_cartesian(1, 1, -0.5);
  const auto traj = integrate_newton(cart, {vec({1.0, 0.0}), vec({0.0, 1.0}), 0.0}, 2 * pi);
  for (const auto& s : traj.samples()) EXPECT_NEAR(s.q.norm(), 1.0, 1e-8);

  // the same orbit in the polar chart: r = 1, theta' = 1
  const auto polar = fixtures::kepler_polar(1, 1, -0.5);
  const auto ptraj = integrate_newton(polar, {vec({1.0, 0.0}), vec({0.0, 1.0}), 0.0}, 2 * pi);
  for (const auto& s : ptraj.samples()) {
    EXPECT_NEAR(s.q[0], 1.0, 1e-8);
    EXPECT_NEAR(s.q[1], s.param, 1e-8);
  }
}

TEST(Newton, EnergyDriftOverOnePeriod) {
  const auto sys = fixtures::harmonic_system({1.0, 1.0}, 0.5 * (0.25 + 0.3 * 0.3 + 0.81));
  const auto traj = integrate_newton(sys, {vec({0.5, 0.3}), vec({0.9, 0.0}), 0.0}, 2 * pi, no_guard());
  EXPECT_LT(traj.info().max_drift, 1e-8);
  for (const auto& s : traj.samples())
    EXPECT_LT(std::abs(traj.energy(s) - sys.energy()) / sys.energy(), 1e-8);
}

TEST(Newton, BoundaryGuardStopsAtTurningPoint) {
  const auto sys = fixtures::harmonic_system({1.0}, 0.5);
  const auto traj = integrate_newton(sys, {vec({0.0}), vec({1.0}), 0.0}, 3.0);
  EXPECT_EQ(traj.termination(), Termination::boundary);
  EXPECT_LT(traj.back_param(), 3.0);
}

TEST(Newton, ParameterStrictlyIncreases) {
  const auto sys = fixtures::kepler_cartesian(1, 1, -0.5);
  const auto traj = integrate_newton(sys, {vec({0.2, 0.0}), vec({0.0, 3.0}), 0.0}, 2 * pi);
  for (std::size_t i = 1; i < traj.samples().size(); ++i)
    EXPECT_GT(traj.samples()[i].param, traj.samples()[i - 1].param);
  EXPECT_GT(traj.info().accepted, 0);
  EXPECT_EQ(traj.info().method, "dopri5/newton");
}

TEST(Geodesic, FreeParticleIsAffineStraightLine) {
  // h = 2E delta with E = 1/2, so unit h-speed is unit Euclidean speed
  const auto sys = fixtures::free_system(2, 0.5);
  const Vector q0 = vec({0.0, 1.0});
  const auto traj = integrate_geodesic(sys, {q0, vec({3.0, 4.0}), 0.0}, 2.0);
  const Vector dir = vec({0.6, 0.8});
  for (const auto& s : traj.samples()) EXPECT_LT((s.q - (q0 + dir * s.param)).norm(), 1e-12);
}

TEST(Geodesic, KeplerCircleImage) {
  const auto sys = fixtures::kepler_cartesian(1, 1, -0.5);
  // h-length of the unit circle: sqrt(2(E - V)) * 2 pi = 2 pi
  const auto traj = integrate_geodesic(sys, {vec({1.0, 0.0}), vec({0.0, 1.0}), 0.0}, 2 * pi,
                                       DynamicsOptions{1e-12});
  for (const auto& s : traj.samples()) EXPECT_NEAR(s.q.norm(), 1.0, 1e-6);
  EXPECT_LT(traj.info().max_drift, 1e-7);
}

TEST(Geodesic, MatchesNewtonHarmonicAlongAxis) {
  const auto sys = fixtures::harmonic_system({1.0, 0.0}, 0.5);
  const auto r = compare_formulations(sys, {vec({0.0, 0.0}), vec({1.0, 0.0}), 0.0}, 1.2,
                                      DynamicsOptions{1e-12});
  EXPECT_GT(r.compared, 5);
  EXPECT_LT(r.max_distance, 1e-6);
}

TEST(Geodesic, MatchesNewtonKeplerOrbits) {
  const auto sys = fixtures::kepler_cartesian(1, 1, -0.5);
  const auto circular = compare_formulations(sys, {vec({1.0, 0.0}), vec({0.0, 1.0}), 0.0}, 2 * pi,
                                             DynamicsOptions{1e-12});
  EXPECT_LT(circular.max_distance, 1e-6);
  // l = 0.6: perihelion 0.2, aphelion 1.8
  const auto eccentric = compare_formulations(sys, {vec({0.2, 0.0}), vec({0.0, 3.0}), 0.0},
                                              2 * pi, DynamicsOptions{1e-12});
  EXPECT_GT(eccentric.compared, 20);
  EXPECT_LT(eccentric.max_distance, 1e-6);
}

TEST(Reparametrize, FreeParticleUnitFactor) {
  const auto sys = fixtures::free_system(2, 0.5);
  const auto traj = integrate_newton(sys, {vec({0, 0}), vec({1, 0}), 0.0}, 3.0);
  const auto mapped = reparametrize(traj, Reparametrization::t_to_stilde);
  ASSERT_EQ(mapped.samples().size(), traj.samples().size());
  for (std::size_t i = 0; i < traj.samples().size(); ++i)
    EXPECT_NEAR(mapped.samples()[i].param, traj.samples()[i].param, 1e-14);
  EXPECT_EQ(mapped.kind(), Parametrization::affine);
}

TEST(Reparametrize, ConstantPotentialHalfEnergy) {
  const double E = 0.8;
  const MechanicalSystem sys(KineticMetric::cartesian(1, 2),
                             PotentialField::central({[E](double) { return E / 2; }}, 2), E);
  const double speed = std::sqrt(E);  // 1/2 v^2 = E/2
  const auto traj = integrate_newton(sys, {vec({1, 1}), vec({speed, 0}), 0.0}, 2.5);
  const auto mapped = reparametrize(traj, Reparametrization::t_to_stilde);
  EXPECT_NEAR(mapped.back_param(), E * 2.5, 1e-13);
}

TEST(Reparametrize, RoundTripRecoversTime) {
  const auto sys = fixtures::harmonic_system({1.0, 1.0}, 0.5 * (0.25 + 0.81));
  const auto traj = integrate_newton(sys, {vec({0.5, 0.0}), vec({0.0, 0.9}), 0.0}, 2 * pi);
  const auto there = reparametrize(traj, Reparametrization::t_to_stilde);
  const auto back = reparametrize(there, Reparametrization::stilde_to_t);
  double worst = 0;
  for (std::size_t i = 0; i < traj.samples().size(); ++i)
    worst = std::max(worst, std::abs(back.samples()[i].param - traj.samples()[i].param));
  EXPECT_LT(worst, 1e-8);
  EXPECT_THROW(reparametrize(traj, Reparametrization::stilde_to_t), DomainError);
}

TEST(Reparametrize, RejectsTurningPoints) {
  const auto sys = fixtures::harmonic_system({1.0}, 0.5);
  const auto traj = integrate_newton(sys, {vec({1.0}), vec({0.0}), 0.0}, 1.0, no_guard());
  EXPECT_THROW(reparametrize(traj, Reparametrization::t_to_stilde), DomainError);
}

TEST(Action, FreeParticleUnitInterval) {
  const auto sys = fixtures::free_system(2, 0.5);
  const auto traj = integrate_newton(sys, {vec({0, 0}), vec({0.6, 0.8}), 0.0}, 1.0);
  const auto a = maupertuis_action(traj);
  EXPECT_NEAR(a.p_dq, 1.0, 1e-12);
  EXPECT_NEAR(a.two_t_dt, 1.0, 1e-12);
  EXPECT_NEAR(a.sqrt_2t_ds, 1.0, 1e-12);
}

TEST(Action, ZeroLengthTrajectory) {
  const auto sys = fixtures::free_system(2, 0.5);
  const auto traj = integrate_newton(sys, {vec({0, 0}), vec({1, 0}), 2.0}, 2.0);
  const auto a = maupertuis_action(traj);
  EXPECT_EQ(a.p_dq, 0.0);
  EXPECT_EQ(a.two_t_dt, 0.0);
  EXPECT_EQ(a.sqrt_2t_ds, 0.0);
}

TEST(Action, HarmonicPeriodMatchesEllipseArea) {
  // m = k = 1, E = 1/2: the phase-space ellipse has area 2 pi E / omega = pi
  const auto sys = fixtures::harmonic_system({1.0}, 0.5);
  const auto traj = integrate_newton(sys, {vec({0.0}), vec({1.0}), 0.0}, 2 * pi, no_guard());
  const auto a = maupertuis_action(traj);
  EXPECT_NEAR(a.p_dq / pi, 1.0, 1e-6);
  EXPECT_NEAR(a.two_t_dt / pi, 1.0, 1e-6);
  EXPECT_NEAR(a.sqrt_2t_ds / pi, 1.0, 1e-6);
}

TEST(Variation, FreeParticleSecondOrder) {
  const auto sys = fixtures::free_system(2, 0.5);
  const auto traj = integrate_newton(sys, {vec({0, 0}), vec({1, 0}), 0.0}, 2.0);
  const auto big = first_variation_check(sys, traj, 1e-3);
  const auto small = first_variation_check(sys, traj, 5e-4);
  EXPECT_GT(big.delta, 0.0);
  EXPECT_LT(big.ratio, 10.0);
  EXPECT_NEAR(big.delta / small.delta, 4.0, 0.05);
}

TEST(Variation, HarmonicGeodesicSegment) {
  const auto sys = fixtures::harmonic_system({1.0, 1.0}, 1.0);
  const auto geo = integrate_geodesic(sys, {vec({0.2, -0.3}), vec({1.0, 0.4}), 0.0}, 1.0,
                                      DynamicsOptions{1e-12});
  const auto big = first_variation_check(sys, geo, 1e-3);
  const auto small = first_variation_check(sys, geo, 5e-4);
  EXPECT_NEAR(std::abs(big.delta / small.delta), 4.0, 0.05);
}

TEST(Variation, PerturbationLeavingSigmaIsAnError) {
  const auto sys = fixtures::harmonic_system({1.0, 1.0}, 0.5);
  const auto traj = integrate_newton(sys, {vec({0, 0}), vec({0.5, 0}), 0.0}, 0.5);
  EXPECT_THROW(first_variation_check(sys, traj, 5.0), DomainError);
}

TEST(Export, CsvColumnsAndRows) {
  const auto sys = fixtures::free_system(2, 0.5);
  const auto traj = integrate_newton(sys, {vec({0, 0}), vec({1, 0}), 0.0}, 1.0);
  std::ostringstream out;
  write_trajectory_csv(out, traj);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "param,q1,q2,v1,v2,energy");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, traj.samples().size());
}
