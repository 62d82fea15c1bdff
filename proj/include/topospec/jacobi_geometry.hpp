#pragma once

// Jacobi metric h = 2(E - V) g, its orthonormal coframe, and the connection
// and curvature forms obtained from Cartan's structure equations
//
//   d theta^a = -omega^a_b ^ theta^b,    R^a_b = d omega^a_b + omega^a_c ^ omega^c_b.
//
// Connection and curvature are stored in the coordinate cobasis together with
// the coframe that was used to build them; frame components are derived on demand.

#include "topospec/finite_difference.hpp"
#include "topospec/scalar_fields.hpp"
#include "topospec/types.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <utility>
#include <vector>

namespace topospec {

struct JacobiMetricPoint {
  std::shared_ptr<const MechanicalSystem> system;
  Vector q;
  Matrix h;
  double budget = 0.0;         // E - V(q)
  bool conformal = false;      // g is a constant multiple of the identity
  std::optional<double> phi;   // ln[2 m (E - V)], set when conformal
};

inline JacobiMetricPoint jacobi_metric(std::shared_ptr<const MechanicalSystem> system,
                                       const Vector& q) {
  require_dimension(q.size(), system->dimension(), "jacobi_metric");
  const double budget = system->kinetic_budget(q);
  if (!(budget > 0)) throw DomainError("jacobi_metric: point outside the allowed region (E <= V)");
  JacobiMetricPoint p;
  p.q = q;
  p.budget = budget;
  p.h = 2.0 * budget * system->metric().at(q);
  p.conformal = system->metric().is_cartesian();
  if (p.conformal) p.phi = std::log(2.0 * system->metric().mass() * budget);
  p.system = std::move(system);
  return p;
}

inline JacobiMetricPoint jacobi_metric(const MechanicalSystem& system, const Vector& q) {
  return jacobi_metric(std::make_shared<const MechanicalSystem>(system), q);
}

//--------------------------------------------------------------------------------------------------
// Coframes

/// Rows are the components of theta^a on dq^alpha.
struct Coframe {
  Matrix theta;

  /// theta^T theta, which must reproduce h.
  Matrix metric() const { return theta.transpose() * theta; }
};

/// A coframe together with its first coordinate derivatives, d[mu] = d theta / d q^mu.
struct CoframeJet {
  Matrix frame;
  std::vector<Matrix> d;
};

using CoframeField = std::function<CoframeJet(const Vector&)>;

namespace detail {

inline Matrix cholesky_coframe(const Matrix& h) {
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success)
    throw NumericalError("coframe: Jacobi metric is not positive definite");
  return llt.matrixU();
}

}  // namespace detail

/// Gauge-fixed coframe: theta^a = sqrt(h_aa) dq^a for diagonal metrics,
/// otherwise the transposed Cholesky factor of h.
inline Coframe coframe_at(const JacobiMetricPoint& p) {
  if (p.system->metric().is_diagonal())
    return {p.h.diagonal().cwiseSqrt().asDiagonal().toDenseMatrix()};
  return {detail::cholesky_coframe(p.h)};
}

/// Coframe and its derivatives in the default gauge. Diagonal metrics use the
/// potential gradient; general metrics differentiate the factorization numerically.
inline CoframeJet natural_coframe_jet(const MechanicalSystem& system, const Vector& q,
                                      const FiniteDifference& fd = {}) {
  const int k = system.dimension();
  const double budget = system.kinetic_budget(q);
  if (!(budget > 0)) throw DomainError("coframe: point outside the allowed region (E <= V)");
  CoframeJet jet;
  const auto& metric = system.metric();
  if (metric.is_diagonal()) {
    const Matrix g = metric.at(q);
    const auto dg = metric.derivatives(q, fd);
    const Vector grad = system.potential().gradient(q);
    jet.frame = Matrix::Zero(k, k);
    jet.d.assign(k, Matrix::Zero(k, k));
    for (int a = 0; a < k; ++a) {
      const double e = std::sqrt(2.0 * budget * g(a, a));
      jet.frame(a, a) = e;
      for (int mu = 0; mu < k; ++mu)
        jet.d[mu](a, a) = (-grad[mu] * g(a, a) + budget * dg[mu](a, a)) / e;
    }
    return jet;
  }
  auto frame_of = [&](const Vector& x) {
    return detail::cholesky_coframe(2.0 * system.kinetic_budget(x) * metric.at(x));
  };
  jet.frame = frame_of(q);
  for (int mu = 0; mu < k; ++mu) jet.d.push_back(partial(frame_of, q, mu, fd));
  return jet;
}

inline CoframeField natural_coframe_field(std::shared_ptr<const MechanicalSystem> system,
                                          FiniteDifference fd = {}) {
  return [system = std::move(system), fd](const Vector& q) {
    return natural_coframe_jet(*system, q, fd);
  };
}

//--------------------------------------------------------------------------------------------------
// Connection and curvature

struct ConnectionForm {
  Matrix coframe;              // theta used for frame components
  std::vector<Matrix> coord;   // coord[mu](a, b) = omega_{ab} component on dq^mu

  int dimension() const { return static_cast<int>(coframe.rows()); }

  /// omega_{ab,c}: expansion omega_ab = omega_{ab,c} theta^c.
  double component(int a, int b, int c) const {
    const Matrix inv = coframe.inverse();
    double s = 0;
    for (int mu = 0; mu < dimension(); ++mu) s += coord[mu](a, b) * inv(mu, c);
    return s;
  }

  /// One-form omega_ab on the coordinate cobasis.
  Vector one_form(int a, int b) const {
    Vector w(dimension());
    for (int mu = 0; mu < dimension(); ++mu) w[mu] = coord[mu](a, b);
    return w;
  }
};

struct CurvatureForm {
  Matrix coframe;
  std::vector<Matrix> coord;   // coord[a * k + b](nu, mu): R_ab = 1/2 F_{nu mu} dq^nu ^ dq^mu

  int dimension() const { return static_cast<int>(coframe.rows()); }

  const Matrix& two_form(int a, int b) const { return coord[a * dimension() + b]; }

  /// R_{ab,cd}: expansion R_ab = 1/2 R_{ab,cd} theta^c ^ theta^d.
  double component(int a, int b, int c, int d) const {
    const Matrix inv = coframe.inverse();
    return (inv.col(c).transpose() * two_form(a, b) * inv.col(d))(0, 0);
  }

  double max_abs() const {
    double s = 0;
    for (const auto& m : coord) s = std::max(s, m.cwiseAbs().maxCoeff());
    return s;
  }
};

enum class Branch {
  automatic,  // analytic conformal formulas when g is cartesian, Cartan solve otherwise
  analytic,
  numeric,
};

namespace detail {

inline Matrix antisymmetrize(const Matrix& m) { return 0.5 * (m - m.transpose()); }

inline Matrix wedge_one_forms(const Vector& a, const Vector& b) {
  return a * b.transpose() - b * a.transpose();
}

// Makes R_ba = -R_ab exactly and each two-form exactly antisymmetric.
inline void normalize_curvature(CurvatureForm& r) {
  const int k = r.dimension();
  for (int a = 0; a < k; ++a) {
    r.coord[a * k + a].setZero();
    for (int b = a + 1; b < k; ++b) {
      r.coord[a * k + b] = antisymmetrize(r.coord[a * k + b]);
      r.coord[b * k + a] = -r.coord[a * k + b];
    }
  }
}

inline void normalize_connection(ConnectionForm& w) {
  for (auto& m : w.coord) m = antisymmetrize(m);
}

// Stacks connection components into a (k*k) x k matrix: row a*k+b, column mu.
inline Matrix pack(const ConnectionForm& w) {
  const int k = w.dimension();
  Matrix p(k * k, k);
  for (int mu = 0; mu < k; ++mu)
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) p(a * k + b, mu) = w.coord[mu](a, b);
  return p;
}

inline void require_curvature_dimension(int k) {
  if (k < 2 || k > 4) throw DimensionError("curvature machinery supports 2 <= k <= 4");
}

// Gradient and hessian of sigma = phi / 2 for the conformal branch.
struct ConformalJet {
  double budget;
  Vector dsigma;
  Matrix ddsigma;
};

inline ConformalJet conformal_jet(const MechanicalSystem& system, const Vector& q, bool hessian) {
  if (!system.metric().is_cartesian())
    throw DomainError("analytic branch requires a cartesian mass metric");
  const double b = system.kinetic_budget(q);
  if (!(b > 0)) throw DomainError("point outside the allowed region (E <= V)");
  const Vector grad = system.potential().gradient(q);
  ConformalJet j{b, -0.5 * grad / b, Matrix()};
  if (hessian)
    j.ddsigma = -0.5 * (system.potential().hessian(q) / b + grad * grad.transpose() / (b * b));
  return j;
}

}  // namespace detail

/// Levi-Civita connection of the coframe in `jet`, solved algebraically from
/// the first structure equation.
inline ConnectionForm cartan_connection(const CoframeJet& jet) {
  const auto k = jet.frame.rows();
  const Matrix inv = jet.frame.inverse();
  // c[a](b, c): d theta^a = 1/2 c_abc theta^b ^ theta^c
  std::vector<Matrix> c(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    Matrix D(k, k);
    for (Eigen::Index nu = 0; nu < k; ++nu)
      for (Eigen::Index mu = 0; mu < k; ++mu) D(nu, mu) = jet.d[nu](a, mu) - jet.d[mu](a, nu);
    c[a] = inv.transpose() * D * inv;
  }
  ConnectionForm w{jet.frame, std::vector<Matrix>(k, Matrix::Zero(k, k))};
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b)
      for (Eigen::Index cc = 0; cc < k; ++cc) {
        const double wabc = 0.5 * (c[b](cc, a) - c[cc](a, b) + c[a](b, cc));
        for (Eigen::Index mu = 0; mu < k; ++mu) w.coord[mu](a, b) += wabc * jet.frame(cc, mu);
      }
  detail::normalize_connection(w);
  return w;
}

/// Curvature of a coframe field at q: d omega by central differences of the
/// algebraically solved connection, plus omega ^ omega.
inline CurvatureForm cartan_curvature(const CoframeField& field, const Vector& q,
                                      const FiniteDifference& fd = {}) {
  const int k = static_cast<int>(q.size());
  detail::require_curvature_dimension(k);
  const ConnectionForm w = cartan_connection(field(q));
  std::vector<Matrix> dw;
  for (int nu = 0; nu < k; ++nu)
    dw.push_back(partial([&](const Vector& x) { return detail::pack(cartan_connection(field(x))); },
                         q, nu, fd));
  CurvatureForm r{w.coframe, std::vector<Matrix>(k * k, Matrix::Zero(k, k))};
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) {
      Matrix& F = r.coord[a * k + b];
      for (int nu = 0; nu < k; ++nu)
        for (int mu = 0; mu < k; ++mu) {
          double s = dw[nu](a * k + b, mu) - dw[mu](a * k + b, nu);
          for (int c = 0; c < k; ++c)
            s += w.coord[nu](a, c) * w.coord[mu](c, b) - w.coord[mu](a, c) * w.coord[nu](c, b);
          F(nu, mu) = s;
        }
    }
  detail::normalize_curvature(r);
  return r;
}

/// Conformal connection for h = e^phi delta, theta^a = e^{phi/2} dq^a:
/// omega_ab = sigma_b dq^a - sigma_a dq^b with sigma = phi / 2.
inline ConnectionForm conformal_connection(const MechanicalSystem& system, const Vector& q) {
  const int k = system.dimension();
  const auto j = detail::conformal_jet(system, q, false);
  const double e = std::sqrt(2.0 * system.metric().mass() * j.budget);
  ConnectionForm w{e * Matrix::Identity(k, k), std::vector<Matrix>(k, Matrix::Zero(k, k))};
  for (int mu = 0; mu < k; ++mu)
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b)
        w.coord[mu](a, b) = j.dsigma[b] * (a == mu) - j.dsigma[a] * (b == mu);
  return w;
}

/// Conformal curvature R_ab = d omega_ab + omega_ac ^ omega_cb in closed form.
inline CurvatureForm conformal_curvature(const MechanicalSystem& system, const Vector& q) {
  const int k = system.dimension();
  detail::require_curvature_dimension(k);
  const auto j = detail::conformal_jet(system, q, true);
  const double e = std::sqrt(2.0 * system.metric().mass() * j.budget);
  const double grad2 = j.dsigma.squaredNorm();
  CurvatureForm r{e * Matrix::Identity(k, k), std::vector<Matrix>(k * k, Matrix::Zero(k, k))};
  const Matrix I = Matrix::Identity(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b) {
      const Vector ea = I.col(a), eb = I.col(b);
      const Vector ha = j.ddsigma.row(a).transpose(), hb = j.ddsigma.row(b).transpose();
      r.coord[a * k + b] = detail::wedge_one_forms(hb, ea) - detail::wedge_one_forms(ha, eb) +
                           j.dsigma[b] * detail::wedge_one_forms(ea, j.dsigma) -
                           grad2 * detail::wedge_one_forms(ea, eb) +
                           j.dsigma[a] * detail::wedge_one_forms(j.dsigma, eb);
    }
  detail::normalize_curvature(r);
  return r;
}

inline bool use_analytic(const MechanicalSystem& system, Branch branch) {
  if (branch == Branch::analytic && !system.metric().is_cartesian())
    throw DomainError("analytic branch requires a cartesian mass metric");
  return branch == Branch::analytic ||
         (branch == Branch::automatic && system.metric().is_cartesian());
}

inline ConnectionForm connection_one_form(const MechanicalSystem& system, const Vector& q,
                                          Branch branch = Branch::automatic,
                                          const FiniteDifference& fd = {}) {
  if (use_analytic(system, branch)) return conformal_connection(system, q);
  return cartan_connection(natural_coframe_jet(system, q, fd));
}

inline ConnectionForm connection_one_form(const JacobiMetricPoint& p,
                                          Branch branch = Branch::automatic,
                                          const FiniteDifference& fd = {}) {
  return connection_one_form(*p.system, p.q, branch, fd);
}

inline CurvatureForm curvature_two_form(const MechanicalSystem& system, const Vector& q,
                                        Branch branch = Branch::automatic,
                                        const FiniteDifference& fd = {}) {
  if (use_analytic(system, branch)) return conformal_curvature(system, q);
  require_dimension(q.size(), system.dimension(), "curvature_two_form");
  if (!(system.kinetic_budget(q) > 0))
    throw DomainError("curvature: point outside the allowed region (E <= V)");
  return cartan_curvature([&](const Vector& x) { return natural_coframe_jet(system, x, fd); }, q,
                          fd);
}

inline CurvatureForm curvature_two_form(const JacobiMetricPoint& p,
                                        Branch branch = Branch::automatic,
                                        const FiniteDifference& fd = {}) {
  return curvature_two_form(*p.system, p.q, branch, fd);
}

/// Closed-form curvature component R_{r theta} (frame components) of a central
/// field with polar mass metric:
///   (1 / (4 m (E - V) r)) d/dr ( r V' / (E - V) ).
inline double central_field_curvature(const MechanicalSystem& system, double r) {
  const auto& v = system.potential();
  const double m = system.metric().mass();
  const double b = system.energy() - v.radial_value(r);
  if (!(b > 0)) throw DomainError("central curvature: point outside the allowed region");
  const double d1 = v.radial_derivative(r);
  const double d2 = v.radial_second_derivative(r);
  // d/dr (r V' / b) with b' = -V'
  const double deriv = (d1 + r * d2) / b + r * d1 * d1 / (b * b);
  return deriv / (4.0 * m * b * r);
}

//--------------------------------------------------------------------------------------------------
// Structure-equation residuals

struct StructureResidual {
  double first = 0.0;   // max |d theta + omega ^ theta| coordinate coefficient
  double second = 0.0;  // max |R - d omega - omega ^ omega| coordinate coefficient
};

/// Checks the analytic conformal connection and curvature against finite-difference
/// exterior derivatives of the analytic coframe and connection.
inline StructureResidual structure_residual(const MechanicalSystem& system, const Vector& q,
                                            const FiniteDifference& fd = {}) {
  const int k = system.dimension();
  detail::require_curvature_dimension(k);
  auto frame = [&](const Vector& x) { return conformal_connection(system, x).coframe; };
  const ConnectionForm w = conformal_connection(system, q);
  const CurvatureForm r = conformal_curvature(system, q);
  std::vector<Matrix> dtheta, dw;
  for (int nu = 0; nu < k; ++nu) {
    dtheta.push_back(partial(frame, q, nu, fd));
    dw.push_back(partial([&](const Vector& x) { return detail::pack(conformal_connection(system, x)); },
                         q, nu, fd));
  }
  StructureResidual res;
  for (int a = 0; a < k; ++a)
    for (int nu = 0; nu < k; ++nu)
      for (int mu = 0; mu < k; ++mu) {
        double s = dtheta[nu](a, mu) - dtheta[mu](a, nu);
        for (int b = 0; b < k; ++b)
          s += w.coord[nu](a, b) * w.coframe(b, mu) - w.coord[mu](a, b) * w.coframe(b, nu);
        res.first = std::max(res.first, std::abs(s));
      }
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b)
      for (int nu = 0; nu < k; ++nu)
        for (int mu = 0; mu < k; ++mu) {
          double s = dw[nu](a * k + b, mu) - dw[mu](a * k + b, nu);
          for (int c = 0; c < k; ++c)
            s += w.coord[nu](a, c) * w.coord[mu](c, b) - w.coord[mu](a, c) * w.coord[nu](c, b);
          res.second = std::max(res.second, std::abs(r.two_form(a, b)(nu, mu) - s));
        }
  return res;
}

//--------------------------------------------------------------------------------------------------
// Frame rotations, transformation law and bundle consistency

class FrameRotation {
 public:
  explicit FrameRotation(Matrix lambda, double tolerance = 1e-12) : m_(std::move(lambda)) {
    if (m_.rows() != m_.cols()) throw DimensionError("rotation must be square");
    const auto k = m_.rows();
    if ((m_.transpose() * m_ - Matrix::Identity(k, k)).cwiseAbs().maxCoeff() > tolerance)
      throw DomainError("rotation is not orthogonal");
    if (std::abs(m_.determinant() - 1.0) > tolerance)
      throw DomainError("rotation does not have determinant +1");
  }

  static FrameRotation identity(int k) { return FrameRotation(Matrix::Identity(k, k)); }

  static FrameRotation planar(double angle) {
    Matrix m(2, 2);
    m << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    return FrameRotation(m);
  }

  /// Haar-distributed element of SO(k).
  template <typename Rng>
  static FrameRotation random(int k, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix a(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) a(i, j) = n(rng);
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix q = qr.householderQ();
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < k; ++j)
      if (r(j, j) < 0) q.col(j) *= -1.0;
    if (q.determinant() < 0) q.col(0) *= -1.0;
    return FrameRotation(q, 1e-10);
  }

  const Matrix& matrix() const { return m_; }
  int dimension() const { return static_cast<int>(m_.rows()); }
  FrameRotation inverse() const { return FrameRotation(m_.transpose(), 1e-10); }

 private:
  Matrix m_;
};

/// omega' = L omega L^-1 + L dL^-1 for theta' = L theta. dlambda[mu] holds
/// dL/dq^mu; leave it empty for a constant rotation.
inline ConnectionForm transform_frame(const ConnectionForm& w, const FrameRotation& rotation,
                                      const std::vector<Matrix>& dlambda = {}) {
  const int k = w.dimension();
  require_dimension(rotation.dimension(), k, "transform_frame");
  if (!dlambda.empty()) require_dimension(static_cast<Eigen::Index>(dlambda.size()), k, "dlambda");
  const Matrix& L = rotation.matrix();
  ConnectionForm out{L * w.coframe, {}};
  for (int mu = 0; mu < k; ++mu) {
    Matrix m = L * w.coord[mu] * L.transpose();
    if (!dlambda.empty()) m += L * dlambda[mu].transpose();
    out.coord.push_back(m);
  }
  return out;
}

/// R' = L R L^-1.
inline CurvatureForm transform_frame(const CurvatureForm& r, const FrameRotation& rotation) {
  const int k = r.dimension();
  require_dimension(rotation.dimension(), k, "transform_frame");
  const Matrix& L = rotation.matrix();
  CurvatureForm out{L * r.coframe, std::vector<Matrix>(k * k, Matrix::Zero(k, k))};
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b)
      for (int c = 0; c < k; ++c)
        for (int d = 0; d < k; ++d) out.coord[a * k + b] += L(a, c) * L(b, d) * r.two_form(c, d);
  return out;
}

struct CocycleDefect {
  int i, k, j;
  double defect;  // Frobenius norm of L_ik L_kj - L_ij
};

struct CocycleReport {
  std::vector<CocycleDefect> triples;
  double max_defect = 0.0;
  bool pass = true;
};

using TransitionFamily = std::map<std::pair<int, int>, Matrix>;

inline CocycleReport check_cocycle(const TransitionFamily& family, double tolerance = 1e-10) {
  CocycleReport report;
  for (const auto& [ik, lik] : family)
    for (const auto& [kj, lkj] : family) {
      if (ik.second != kj.first) continue;
      auto it = family.find({ik.first, kj.second});
      if (it == family.end()) continue;
      const double defect = (lik * lkj - it->second).norm();
      report.triples.push_back({ik.first, ik.second, kj.second, defect});
      report.max_defect = std::max(report.max_defect, defect);
    }
  report.pass = report.max_defect < tolerance;
  return report;
}

struct CompatibilityReport {
  std::vector<Matrix> residual;  // per coordinate direction
  double max_residual = 0.0;
  bool pass = true;
};

/// Residual of omega_i - (L omega_j L^-1 + L dL^-1) on a common coordinate patch.
inline CompatibilityReport check_compatibility(const ConnectionForm& wi, const ConnectionForm& wj,
                                               const FrameRotation& lij,
                                               const std::vector<Matrix>& dlij = {},
                                               double tolerance = 1e-10) {
  const ConnectionForm expected = transform_frame(wj, lij, dlij);
  require_dimension(wi.dimension(), wj.dimension(), "check_compatibility");
  CompatibilityReport report;
  for (int mu = 0; mu < wi.dimension(); ++mu) {
    report.residual.push_back(wi.coord[mu] - expected.coord[mu]);
    report.max_residual = std::max(report.max_residual, report.residual.back().cwiseAbs().maxCoeff());
  }
  report.pass = report.max_residual < tolerance;
  return report;
}

}  // namespace topospec
