#include "topospec/jacobi_geometry.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace topospec;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

MechanicalSystem harmonic2d(double k1, double k2, double m, double energy) {
  return {KineticMetric::cartesian(m, 2), PotentialField::harmonic({k1, k2}), energy};
}

MechanicalSystem free2d(double energy) {
  return {KineticMetric::cartesian(1.0, 2), PotentialField::free(2), energy};
}

MechanicalSystem kepler_polar(double m, double alpha, double energy) {
  return {KineticMetric::polar(m), PotentialField::kepler(alpha, 2, Chart::polar), energy};
}

// Random point with E - V >= margin * |E| for the harmonic oscillator.
Vector random_interior(const MechanicalSystem& s, std::mt19937_64& rng, double margin = 0.2) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (;;) {
    Vector q(s.dimension());
    for (auto& x : q) x = u(rng);
    if (sigma_contains(s, q) && s.kinetic_budget(q) >= margin * std::abs(s.energy())) return q;
  }
}

}  // namespace

TEST(JacobiMetric, FreeParticleIsTwoEDelta) {
  const auto p = jacobi_metric(free2d(1.0), vec({0.3, -4.0}));
  EXPECT_TRUE(p.h.isApprox(2.0 * Matrix::Identity(2, 2), 1e-15));
  EXPECT_TRUE(p.conformal);
  EXPECT_DOUBLE_EQ(*p.phi, std::log(2.0));
}

TEST(JacobiMetric, HarmonicExample) {
  const auto p = jacobi_metric(harmonic2d(1, 0, 1, 1), vec({0.5, 0}));
  EXPECT_TRUE(p.h.isApprox(1.75 * Matrix::Identity(2, 2), 1e-15));
}

TEST(JacobiMetric, OutsideSigmaIsAnError) {
  EXPECT_THROW(jacobi_metric(harmonic2d(1, 0, 1, 1), vec({2.0, 0})), DomainError);
  EXPECT_THROW(jacobi_metric(harmonic2d(1, 0, 1, 1), vec({std::sqrt(2.0), 0})), DomainError);
}

TEST(JacobiMetric, PolarMetricIsConformalFactorTimesKinetic) {
  const auto p = jacobi_metric(kepler_polar(2.0, 1.0, -0.5), vec({1.0, 0.3}));
  EXPECT_FALSE(p.conformal);
  EXPECT_FALSE(p.phi.has_value());
  EXPECT_NEAR(p.h(0, 0), 2 * 0.5 * 2.0, 1e-15);
  EXPECT_NEAR(p.h(1, 1), 2 * 0.5 * 2.0, 1e-15);
}

TEST(Coframe, Examples) {
  EXPECT_TRUE(coframe_at(jacobi_metric(free2d(0.5), vec({1, 1}))).theta.isIdentity(1e-15));

  const MechanicalSystem polar_free(KineticMetric::polar(1.0), PotentialField::free(2), 2.0);
  const Matrix t = coframe_at(jacobi_metric(polar_free, vec({3.0, 1.0}))).theta;
  EXPECT_NEAR(t(0, 0), 2.0, 1e-15);
  EXPECT_NEAR(t(1, 1), 6.0, 1e-14);
  EXPECT_EQ(t(0, 1), 0.0);

  const Matrix th = coframe_at(jacobi_metric(harmonic2d(1, 0, 1, 1), vec({0.5, 0}))).theta;
  EXPECT_TRUE(th.isApprox(std::sqrt(1.75) * Matrix::Identity(2, 2), 1e-15));
}

TEST(Coframe, ReproducesMetricForGeneralMetric) {
  auto sys = std::make_shared<const MechanicalSystem>(
      KineticMetric::general(
          [](const Vector& q) {
            Matrix g(2, 2);
            g << 2 + std::sin(q[0]), 0.4 * std::cos(q[1]), 0.4 * std::cos(q[1]), 1 + q[0] * q[0];
            return g;
          },
          2),
      PotentialField::harmonic({1.0, 0.5}), 2.0);
  std::mt19937_64 rng(9);
  for (int i = 0; i < 50; ++i) {
    const auto p = jacobi_metric(sys, random_interior(*sys, rng));
    const Coframe c = coframe_at(p);
    EXPECT_LT((c.metric() - p.h).norm() / p.h.norm(), 1e-12);
  }
}

TEST(Connection, FreeParticleIsFlat) {
  const auto w = connection_one_form(free2d(1.0), vec({0.2, 0.1}));
  for (const auto& m : w.coord) EXPECT_EQ(m.cwiseAbs().maxCoeff(), 0.0);
  const auto wn = connection_one_form(free2d(1.0), vec({0.2, 0.1}), Branch::numeric);
  for (const auto& m : wn.coord) EXPECT_LT(m.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Connection, HarmonicExampleSatisfiesStructureEquation) {
  const auto s = harmonic2d(1, 0, 1, 1);
  const Vector q = vec({0.5, 0});
  const auto w = connection_one_form(s, q);
  // phi_1 = -q1 / (E - V) = -0.571428...; omega_12 = -1/2 e^{-phi/2} phi_1 theta^2
  const double phi1 = -0.5 / 0.875;
  EXPECT_NEAR(phi1, -0.5714285714285714, 1e-15);
  EXPECT_NEAR(w.component(0, 1, 0), 0.0, 1e-15);
  EXPECT_NEAR(w.component(0, 1, 1), -0.5 * phi1 / std::sqrt(1.75), 1e-14);
  EXPECT_EQ(w.component(1, 0, 1), -w.component(0, 1, 1));
  const auto res = structure_residual(s, q);
  EXPECT_LT(res.first, 1e-8);
  EXPECT_LT(res.second, 1e-8);
}

TEST(Connection, AnalyticAndCartanBranchesAgree) {
  std::mt19937_64 rng(21);
  for (int k = 2; k <= 4; ++k) {
    std::vector<double> springs;
    for (int i = 0; i < k; ++i) springs.push_back(0.5 + 0.4 * i);
    const MechanicalSystem s(KineticMetric::cartesian(1.3, k), PotentialField::harmonic(springs), 1.5);
    for (int trial = 0; trial < 20; ++trial) {
      const Vector q = random_interior(s, rng);
      const auto a = connection_one_form(s, q, Branch::analytic);
      const auto n = connection_one_form(s, q, Branch::numeric);
      for (int mu = 0; mu < k; ++mu) EXPECT_LT((a.coord[mu] - n.coord[mu]).norm(), 1e-12);
    }
  }
}

TEST(Connection, PolarFreeParticleIsFlatPlaneConnection) {
  const MechanicalSystem s(KineticMetric::polar(1.0), PotentialField::free(2), 0.5);
  const Vector q = vec({1.7, 0.4});
  const auto w = connection_one_form(s, q);
  // omega^theta_r = d theta, omega^r_theta = -d theta
  EXPECT_NEAR(w.coord[1](1, 0), 1.0, 1e-14);
  EXPECT_NEAR(w.coord[1](0, 1), -1.0, 1e-14);
  EXPECT_NEAR(w.coord[0](1, 0), 0.0, 1e-14);
  const auto r = curvature_two_form(s, q);
  EXPECT_LT(r.max_abs(), 1e-8);
}

TEST(Connection, AntisymmetryIsExact) {
  std::mt19937_64 rng(4);
  const MechanicalSystem s(KineticMetric::polar(1.0), PotentialField::kepler(1.0, 2, Chart::polar),
                           -0.5);
  const auto w = connection_one_form(s, vec({0.8, 0.1}));
  const auto r = curvature_two_form(s, vec({0.8, 0.1}));
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      for (int mu = 0; mu < 2; ++mu) EXPECT_EQ(w.coord[mu](a, b), -w.coord[mu](b, a));
      EXPECT_EQ((r.two_form(a, b) + r.two_form(b, a)).cwiseAbs().maxCoeff(), 0.0);
      EXPECT_EQ((r.two_form(a, b) + r.two_form(a, b).transpose()).cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(Curvature, FreeParticleIsFlat) {
  EXPECT_EQ(curvature_two_form(free2d(1.0), vec({0.3, 0.3})).max_abs(), 0.0);
}

TEST(Curvature, TwoDimensionalGaussianIdentity) {
  // Oracle: closed-form Laplacian of phi = ln[2m(E - k1 x^2/2 - k2 y^2/2)].
  std::mt19937_64 rng(12);
  const double k1 = 1.3, k2 = 0.6, m = 1.7, energy = 2.0;
  const auto s = harmonic2d(k1, k2, m, energy);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector q = random_interior(s, rng, 0.05);
    const double b = s.kinetic_budget(q);
    const double lap = -k1 / b - k1 * k1 * q[0] * q[0] / (b * b) - k2 / b -
                       k2 * k2 * q[1] * q[1] / (b * b);
    const auto r = curvature_two_form(s, q);
    EXPECT_NEAR(r.two_form(0, 1)(0, 1), -0.5 * lap, 1e-8 * std::abs(lap));
  }
}

TEST(Curvature, KeplerNumericBranchMatchesClosedForm) {
  const auto s = kepler_polar(1.0, 1.0, -0.5);
  const auto r = curvature_two_form(s, vec({1.0, 0.0}));
  const double closed = central_field_curvature(s, 1.0);
  EXPECT_NEAR(r.component(0, 1, 0, 1), closed, 1e-6 * std::abs(closed));
  for (double radius : {0.3, 0.7, 1.5, 1.9}) {
    const double c = central_field_curvature(s, radius);
    EXPECT_NEAR(curvature_two_form(s, vec({radius, 1.1})).component(0, 1, 0, 1), c,
                1e-6 * std::abs(c));
  }
}

TEST(Curvature, AnalyticAndNumericBranchesAgreeUpToFourDimensions) {
  std::mt19937_64 rng(8);
  for (int k = 2; k <= 4; ++k) {
    std::vector<double> springs;
    for (int i = 0; i < k; ++i) springs.push_back(1.0 + 0.3 * i);
    const MechanicalSystem s(KineticMetric::cartesian(1.0, k), PotentialField::harmonic(springs), 2.0);
    for (int trial = 0; trial < 10; ++trial) {
      const Vector q = random_interior(s, rng);
      const auto a = curvature_two_form(s, q, Branch::analytic);
      const auto n = curvature_two_form(s, q, Branch::numeric);
      for (int i = 0; i < k * k; ++i)
        EXPECT_LT((a.coord[i] - n.coord[i]).cwiseAbs().maxCoeff(), 1e-7 * std::max(1.0, a.max_abs()));
    }
  }
  EXPECT_THROW(curvature_two_form(harmonic2d(1, 1, 1, 1).with_energy(1.0), vec({3, 3})), Error);
}

TEST(StructureEquations, ResidualAtRandomPoints) {
  std::mt19937_64 rng(99);
  const std::vector<MechanicalSystem> systems = {
      harmonic2d(1, 0, 1, 1), harmonic2d(1.3, 0.6, 1.7, 2.0),
      MechanicalSystem(KineticMetric::cartesian(1, 2), PotentialField::kepler(1.0), -0.5),
      MechanicalSystem(KineticMetric::cartesian(1, 3), PotentialField::harmonic({1, 2, 3}), 2.0)};
  for (const auto& s : systems)
    for (int trial = 0; trial < 100; ++trial) {
      Vector q = random_interior(s, rng);
      if (s.potential().family_name() == "kepler" && q.norm() < 0.3) continue;
      const auto res = structure_residual(s, q);
      EXPECT_LT(res.first, 1e-6);
      EXPECT_LT(res.second, 1e-6);
    }
}

TEST(TransformFrame, IdentityLeavesObjectsUnchanged) {
  const auto s = harmonic2d(1, 0.5, 1, 1);
  const Vector q = vec({0.3, 0.2});
  const auto w = connection_one_form(s, q);
  const auto r = curvature_two_form(s, q);
  const auto id = FrameRotation::identity(2);
  const auto w2 = transform_frame(w, id);
  const auto r2 = transform_frame(r, id);
  for (int mu = 0; mu < 2; ++mu) EXPECT_EQ((w2.coord[mu] - w.coord[mu]).norm(), 0.0);
  for (int i = 0; i < 4; ++i) EXPECT_EQ((r2.coord[i] - r.coord[i]).norm(), 0.0);
}

TEST(TransformFrame, PlanarRotationFixesTheCurvatureComponent) {
  const auto s = harmonic2d(1, 0.5, 1, 1);
  const auto r = curvature_two_form(s, vec({0.3, 0.2}));
  const auto r2 = transform_frame(r, FrameRotation::planar(0.7));
  EXPECT_NEAR(r2.two_form(0, 1)(0, 1), r.two_form(0, 1)(0, 1), 1e-15);
  EXPECT_NEAR(r2.component(0, 1, 0, 1), r.component(0, 1, 0, 1), 1e-13);
}

TEST(TransformFrame, RoundTripInSO3) {
  std::mt19937_64 rng(31);
  const MechanicalSystem s(KineticMetric::cartesian(1, 3), PotentialField::harmonic({1, 2, 3}), 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector q = random_interior(s, rng);
    const auto L = FrameRotation::random(3, rng);
    const auto w = connection_one_form(s, q);
    const auto r = curvature_two_form(s, q);
    const auto w2 = transform_frame(transform_frame(w, L), L.inverse());
    const auto r2 = transform_frame(transform_frame(r, L), L.inverse());
    for (int mu = 0; mu < 3; ++mu) EXPECT_LT((w2.coord[mu] - w.coord[mu]).cwiseAbs().maxCoeff(), 1e-12);
    for (int i = 0; i < 9; ++i) EXPECT_LT((r2.coord[i] - r.coord[i]).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((w2.coframe - w.coframe).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(TransformFrame, PositionDependentRotationMatchesCartanSolve) {
  // theta' = L(q) theta with L a rotation by angle q1 q2; the Cartan solve on the
  // rotated jet must equal L omega L^-1 + L dL^-1.
  const auto s = harmonic2d(1.0, 0.5, 1.0, 1.5);
  const Vector q = vec({0.4, -0.3});
  auto rot = [](const Vector& x) { return FrameRotation::planar(x[0] * x[1]).matrix(); };
  auto drot = [&](const Vector& x) {
    const double a = x[0] * x[1];
    Matrix d(2, 2);
    d << -std::sin(a), -std::cos(a), std::cos(a), -std::sin(a);
    return std::vector<Matrix>{d * x[1], d * x[0]};
  };
  const CoframeJet jet = natural_coframe_jet(s, q);
  CoframeJet rotated{rot(q) * jet.frame, {}};
  const auto dL = drot(q);
  for (int mu = 0; mu < 2; ++mu) rotated.d.push_back(dL[mu] * jet.frame + rot(q) * jet.d[mu]);
  const auto direct = cartan_connection(rotated);
  const auto transformed = transform_frame(cartan_connection(jet), FrameRotation(rot(q)), dL);
  for (int mu = 0; mu < 2; ++mu)
    EXPECT_LT((direct.coord[mu] - transformed.coord[mu]).cwiseAbs().maxCoeff(), 1e-12);
  const auto report = check_compatibility(direct, cartan_connection(jet), FrameRotation(rot(q)), dL);
  EXPECT_TRUE(report.pass);
}

TEST(TransformFrame, ConjugationCovarianceOfCurvature) {
  std::mt19937_64 rng(77);
  for (int k : {2, 3}) {
    std::vector<double> springs;
    for (int i = 0; i < k; ++i) springs.push_back(1.0 + 0.5 * i);
    auto s = std::make_shared<const MechanicalSystem>(KineticMetric::cartesian(1.0, k),
                                                      PotentialField::harmonic(springs), 2.0);
    for (int trial = 0; trial < 10; ++trial) {
      const Vector q = random_interior(*s, rng);
      const auto L = FrameRotation::random(k, rng);
      const CoframeField base = natural_coframe_field(s);
      const CoframeField rotated = [&](const Vector& x) {
        CoframeJet j = base(x);
        j.frame = L.matrix() * j.frame;
        for (auto& d : j.d) d = L.matrix() * d;
        return j;
      };
      const auto expected = transform_frame(cartan_curvature(base, q), L);
      const auto actual = cartan_curvature(rotated, q);
      for (int i = 0; i < k * k; ++i)
        EXPECT_LT((expected.coord[i] - actual.coord[i]).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(Cocycle, IdentityFamilyPasses) {
  TransitionFamily f;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) f[{i, j}] = Matrix::Identity(2, 2);
  const auto r = check_cocycle(f);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.triples.size(), 27u);
}

TEST(Cocycle, ConstructedFamilyPassesAndPerturbationIsReported) {
  std::mt19937_64 rng(5);
  const Matrix lik = FrameRotation::random(3, rng).matrix();
  const Matrix lkj = FrameRotation::random(3, rng).matrix();
  TransitionFamily f{{{0, 1}, lik}, {{1, 2}, lkj}, {{0, 2}, lik * lkj}};
  auto r = check_cocycle(f);
  EXPECT_TRUE(r.pass);
  ASSERT_EQ(r.triples.size(), 1u);
  EXPECT_LT(r.max_defect, 1e-14);

  Matrix perturbation = Matrix::Zero(3, 3);
  perturbation(1, 2) = 1e-3;
  f[{0, 2}] += perturbation;
  r = check_cocycle(f);
  EXPECT_FALSE(r.pass);
  EXPECT_NEAR(r.max_defect, perturbation.norm(), 1e-12);
}

TEST(Compatibility, IdentityAndConstructed) {
  const auto s = harmonic2d(1, 0.5, 1, 1);
  const auto w = connection_one_form(s, vec({0.1, 0.4}));
  EXPECT_EQ(check_compatibility(w, w, FrameRotation::identity(2)).max_residual, 0.0);
  std::mt19937_64 rng(6);
  const auto L = FrameRotation::random(2, rng);
  const auto r = check_compatibility(transform_frame(w, L), w, L);
  EXPECT_TRUE(r.pass);
  EXPECT_LT(r.max_residual, 1e-12);
}

TEST(Compatibility, ConformalHarmonicCoframesRotatedByQuarterPi) {
  const auto s = harmonic2d(1.0, 0.7, 1.0, 1.0);
  const Vector q = vec({0.35, -0.2});
  const auto L = FrameRotation::planar(std::numbers::pi / 4);
  CoframeJet rotated = natural_coframe_jet(s, q);
  rotated.frame = L.matrix() * rotated.frame;
  for (auto& d : rotated.d) d = L.matrix() * d;
  const auto wi = cartan_connection(rotated);
  const auto wj = connection_one_form(s, q, Branch::analytic);
  const auto report = check_compatibility(wi, wj, L);
  EXPECT_TRUE(report.pass);
  EXPECT_LT(report.max_residual, 1e-10);
}

TEST(FrameRotation, RejectsImproperMatrices) {
  Matrix reflection = Matrix::Identity(2, 2);
  reflection(0, 0) = -1;
  EXPECT_THROW(FrameRotation{reflection}, DomainError);
  EXPECT_THROW(FrameRotation{2.0 * Matrix::Identity(2, 2)}, DomainError);
}
