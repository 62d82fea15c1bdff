#pragma once

// Potentials, kinetic metrics, mechanical systems and the allowed region
// Sigma = { q : E > V(q) }.

#include "topospec/finite_difference.hpp"
#include "topospec/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace topospec {

/// Coordinate chart of the configuration space. In the polar chart q = (r, theta).
enum class Chart { cartesian, polar };

//--------------------------------------------------------------------------------------------------
// Potential families

struct FreePotential {};

/// V = 1/2 sum_i k_i (q^i)^2. In the polar chart the springs must be equal (V = k r^2 / 2).
struct HarmonicPotential {
  std::vector<double> springs;
};

/// V = -alpha / r
struct KeplerPotential {
  double alpha = 1.0;
};

/// V = f(r) for an arbitrary radial profile. Missing derivatives are taken by
/// fourth-order finite differences of the profile.
struct CentralPotential {
  std::function<double(double)> value;
  std::function<double(double)> first;   // optional
  std::function<double(double)> second;  // optional
};

/// Values tabulated on a regular tensor grid, interpolated by local Lagrange
/// polynomials of the given order (1 = multilinear, 3 = cubic).
struct GridPotential {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<int> counts;
  std::vector<double> values;  // row-major, last axis fastest
  int order = 3;
};

class PotentialField {
 public:
  using Family = std::variant<FreePotential, HarmonicPotential, KeplerPotential, CentralPotential,
                              GridPotential>;

  PotentialField(Family family, int dimension, Chart chart = Chart::cartesian)
      : family_(std::move(family)), dimension_(dimension), chart_(chart) {
    if (dimension_ < 1) throw DimensionError("potential: dimension must be >= 1");
    if (chart_ == Chart::polar && dimension_ != 2)
      throw DimensionError("potential: the polar chart is two-dimensional");
    if (auto* h = std::get_if<HarmonicPotential>(&family_)) {
      if (static_cast<int>(h->springs.size()) != dimension_)
        throw DimensionError("harmonic potential: one spring constant per dimension required");
      if (chart_ == Chart::polar && h->springs[0] != h->springs[1])
        throw DomainError("harmonic potential: polar chart requires equal spring constants");
    }
    if (auto* kp = std::get_if<KeplerPotential>(&family_)) {
      if (!(kp->alpha > 0)) throw DomainError("kepler potential: alpha must be positive");
    }
    if (auto* c = std::get_if<CentralPotential>(&family_)) {
      if (!c->value) throw DomainError("central potential: radial profile missing");
    }
    if (auto* g = std::get_if<GridPotential>(&family_)) validate_grid(*g);
  }

  static PotentialField free(int dimension) { return {FreePotential{}, dimension}; }
  static PotentialField harmonic(std::vector<double> springs, Chart chart = Chart::cartesian) {
    const int k = chart == Chart::polar ? 2 : static_cast<int>(springs.size());
    if (chart == Chart::polar && springs.size() == 1) springs.push_back(springs[0]);
    return {HarmonicPotential{std::move(springs)}, k, chart};
  }
  static PotentialField kepler(double alpha, int dimension = 2, Chart chart = Chart::cartesian) {
    return {KeplerPotential{alpha}, dimension, chart};
  }
  static PotentialField central(CentralPotential profile, int dimension = 2,
                                Chart chart = Chart::cartesian) {
    return {std::move(profile), dimension, chart};
  }
  static PotentialField grid(GridPotential grid) {
    const int k = static_cast<int>(grid.counts.size());
    return {std::move(grid), k};
  }

  int dimension() const { return dimension_; }
  Chart chart() const { return chart_; }
  const Family& family() const { return family_; }

  std::string family_name() const {
    static const char* names[] = {"free", "harmonic", "kepler", "central_custom", "grid_sampled"};
    return names[family_.index()];
  }

  bool is_central() const {
    if (std::holds_alternative<KeplerPotential>(family_) ||
        std::holds_alternative<CentralPotential>(family_) ||
        std::holds_alternative<FreePotential>(family_))
      return true;
    if (auto* h = std::get_if<HarmonicPotential>(&family_))
      return std::all_of(h->springs.begin(), h->springs.end(),
                         [&](double s) { return s == h->springs.front(); });
    return false;
  }

  bool has_analytic_gradient() const {
    if (auto* c = std::get_if<CentralPotential>(&family_)) return static_cast<bool>(c->first);
    return !std::holds_alternative<GridPotential>(family_);
  }

  double value(const Vector& q) const {
    require_dimension(q.size(), dimension_, "potential");
    return std::visit(
        [&](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, FreePotential>) {
            return 0.0;
          } else if constexpr (std::is_same_v<T, HarmonicPotential>) {
            if (chart_ == Chart::polar) return 0.5 * f.springs[0] * q[0] * q[0];
            double v = 0;
            for (int i = 0; i < dimension_; ++i) v += 0.5 * f.springs[i] * q[i] * q[i];
            return v;
          } else if constexpr (std::is_same_v<T, GridPotential>) {
            return interpolate(f, q);
          } else {
            return radial_value(radius(q));
          }
        },
        family_);
  }

  /// Covector dV/dq^alpha. Families without an analytic gradient use central
  /// differences with step max(1e-6, 1e-6 |q|).
  Vector gradient(const Vector& q) const {
    require_dimension(q.size(), dimension_, "potential gradient");
    Vector grad = Vector::Zero(dimension_);
    if (std::holds_alternative<FreePotential>(family_)) return grad;
    if (auto* h = std::get_if<HarmonicPotential>(&family_)) {
      if (chart_ == Chart::polar) {
        grad[0] = h->springs[0] * q[0];
        return grad;
      }
      for (int i = 0; i < dimension_; ++i) grad[i] = h->springs[i] * q[i];
      return grad;
    }
    if (std::holds_alternative<GridPotential>(family_)) {
      const double h = std::max(1e-6, 1e-6 * q.norm());
      for (int i = 0; i < dimension_; ++i) {
        Vector qp = q, qm = q;
        qp[i] += h;
        qm[i] -= h;
        grad[i] = (value(qp) - value(qm)) / (2 * h);
      }
      return grad;
    }
    // central families
    const double r = radius(q);
    const double dv = radial_derivative(r);
    if (chart_ == Chart::polar) {
      grad[0] = dv;
      return grad;
    }
    if (r == 0.0) return grad;
    return dv / r * q;
  }

  Matrix hessian(const Vector& q) const {
    require_dimension(q.size(), dimension_, "potential hessian");
    const int k = dimension_;
    Matrix hess = Matrix::Zero(k, k);
    if (std::holds_alternative<FreePotential>(family_)) return hess;
    if (auto* h = std::get_if<HarmonicPotential>(&family_)) {
      if (chart_ == Chart::polar) {
        hess(0, 0) = h->springs[0];
        return hess;
      }
      for (int i = 0; i < k; ++i) hess(i, i) = h->springs[i];
      return hess;
    }
    if (std::holds_alternative<GridPotential>(family_)) {
      const double h = 1e-4 * (1.0 + q.norm());
      const double v0 = value(q);
      for (int i = 0; i < k; ++i) {
        Vector qp = q, qm = q;
        qp[i] += h;
        qm[i] -= h;
        hess(i, i) = (value(qp) - 2 * v0 + value(qm)) / (h * h);
        for (int j = 0; j < i; ++j) {
          Vector a = q, b = q, c = q, d = q;
          a[i] += h, a[j] += h;
          b[i] += h, b[j] -= h;
          c[i] -= h, c[j] += h;
          d[i] -= h, d[j] -= h;
          hess(i, j) = hess(j, i) = (value(a) - value(b) - value(c) + value(d)) / (4 * h * h);
        }
      }
      return hess;
    }
    const double r = radius(q);
    const double d1 = radial_derivative(r);
    const double d2 = radial_second_derivative(r);
    if (chart_ == Chart::polar) {
      hess(0, 0) = d2;
      return hess;
    }
    if (r == 0.0) return d2 * Matrix::Identity(k, k);
    const Vector n = q / r;
    const Matrix nn = n * n.transpose();
    return d2 * nn + (d1 / r) * (Matrix::Identity(k, k) - nn);
  }

  /// Radial profile of a central family.
  double radial_value(double r) const {
    return std::visit(
        [&](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, FreePotential>) {
            return 0.0;
          } else if constexpr (std::is_same_v<T, HarmonicPotential>) {
            return 0.5 * f.springs[0] * r * r;
          } else if constexpr (std::is_same_v<T, KeplerPotential>) {
            if (!(r > 0)) throw DomainError("kepler potential: requires r > 0");
            return -f.alpha / r;
          } else if constexpr (std::is_same_v<T, CentralPotential>) {
            return f.value(r);
          } else {
            throw DomainError("grid potential is not central");
          }
        },
        family_);
  }

  double radial_derivative(double r) const {
    if (!is_central()) throw DomainError("potential is not central");
    if (auto* kp = std::get_if<KeplerPotential>(&family_)) {
      if (!(r > 0)) throw DomainError("kepler potential: requires r > 0");
      return kp->alpha / (r * r);
    }
    if (auto* h = std::get_if<HarmonicPotential>(&family_)) return h->springs[0] * r;
    if (auto* c = std::get_if<CentralPotential>(&family_)) {
      if (c->first) return c->first(r);
      return derivative1([&](double x) { return c->value(x); }, r, profile_fd());
    }
    return 0.0;
  }

  double radial_second_derivative(double r) const {
    if (!is_central()) throw DomainError("potential is not central");
    if (auto* kp = std::get_if<KeplerPotential>(&family_)) {
      if (!(r > 0)) throw DomainError("kepler potential: requires r > 0");
      return -2.0 * kp->alpha / (r * r * r);
    }
    if (auto* h = std::get_if<HarmonicPotential>(&family_)) return h->springs[0];
    if (auto* c = std::get_if<CentralPotential>(&family_)) {
      if (c->second) return c->second(r);
      if (c->first) return derivative1([&](double x) { return c->first(x); }, r, profile_fd());
      return derivative2([&](double x) { return c->value(x); }, r, profile_fd());
    }
    return 0.0;
  }

  /// Radial coordinate of q in this field's chart.
  double radius(const Vector& q) const {
    if (chart_ == Chart::polar) return q[0];
    return q.norm();
  }

 private:
  static FiniteDifference profile_fd() { return {1e-3, 4}; }

  static void validate_grid(const GridPotential& g) {
    const auto k = g.counts.size();
    if (k == 0 || g.lower.size() != k || g.upper.size() != k)
      throw DimensionError("grid potential: lower/upper/counts must share the dimension");
    std::size_t total = 1;
    for (std::size_t a = 0; a < k; ++a) {
      if (g.counts[a] < 2 || !(g.upper[a] > g.lower[a]))
        throw DomainError("grid potential: each axis needs >= 2 nodes and upper > lower");
      total *= static_cast<std::size_t>(g.counts[a]);
    }
    if (g.values.size() != total) throw DimensionError("grid potential: wrong number of values");
    if (g.order < 1) throw DomainError("grid potential: interpolation order must be >= 1");
    for (std::size_t a = 0; a < k; ++a)
      if (g.counts[a] < g.order + 1)
        throw DomainError("grid potential: not enough nodes for the interpolation order");
  }

  // Tensor-product Lagrange interpolation on the (order+1)^k nodes nearest to q.
  double interpolate(const GridPotential& g, const Vector& q) const {
    const int k = dimension_;
    const int npts = g.order + 1;
    std::vector<int> first(k);
    std::vector<std::vector<double>> weights(k, std::vector<double>(npts));
    for (int a = 0; a < k; ++a) {
      const double h = (g.upper[a] - g.lower[a]) / (g.counts[a] - 1);
      const double s = (q[a] - g.lower[a]) / h;
      if (s < -1e-12 || s > g.counts[a] - 1 + 1e-12)
        throw DomainError("grid potential: query point outside the tabulated box");
      int start = static_cast<int>(std::floor(s)) - (npts - 1) / 2;
      start = std::clamp(start, 0, g.counts[a] - npts);
      first[a] = start;
      for (int i = 0; i < npts; ++i) {
        double w = 1.0;
        for (int j = 0; j < npts; ++j)
          if (j != i) w *= (s - (start + j)) / static_cast<double>(i - j);
        weights[a][i] = w;
      }
    }
    double sum = 0.0;
    std::vector<int> idx(k, 0);
    for (;;) {
      std::size_t flat = 0;
      double w = 1.0;
      for (int a = 0; a < k; ++a) {
        flat = flat * static_cast<std::size_t>(g.counts[a]) + static_cast<std::size_t>(first[a] + idx[a]);
        w *= weights[a][idx[a]];
      }
      sum += w * g.values[flat];
      int a = k - 1;
      while (a >= 0 && ++idx[a] == npts) idx[a--] = 0;
      if (a < 0) break;
    }
    return sum;
  }

  Family family_;
  int dimension_;
  Chart chart_;
};

//--------------------------------------------------------------------------------------------------
// Kinetic metrics

struct CartesianMass {
  double m = 1.0;
};

/// g = diag(m, m r^2) in the polar chart (r, theta).
struct DiagonalPolar {
  double m = 1.0;
};

/// Arbitrary smooth symmetric positive-definite g(q); derivatives by finite differences.
struct GeneralSmooth {
  std::function<Matrix(const Vector&)> g;
};

class KineticMetric {
 public:
  using Form = std::variant<CartesianMass, DiagonalPolar, GeneralSmooth>;

  KineticMetric(Form form, int dimension) : form_(std::move(form)), dimension_(dimension) {
    if (dimension_ < 1) throw DimensionError("metric: dimension must be >= 1");
    if (auto* c = std::get_if<CartesianMass>(&form_); c && !(c->m > 0))
      throw DomainError("metric: mass must be positive");
    if (auto* p = std::get_if<DiagonalPolar>(&form_)) {
      if (!(p->m > 0)) throw DomainError("metric: mass must be positive");
      if (dimension_ != 2) throw DimensionError("metric: the polar form is two-dimensional");
    }
    if (auto* s = std::get_if<GeneralSmooth>(&form_); s && !s->g)
      throw DomainError("metric: general form needs a matrix function");
  }

  static KineticMetric cartesian(double m, int dimension) { return {CartesianMass{m}, dimension}; }
  static KineticMetric polar(double m) { return {DiagonalPolar{m}, 2}; }
  static KineticMetric general(std::function<Matrix(const Vector&)> g, int dimension) {
    return {GeneralSmooth{std::move(g)}, dimension};
  }

  int dimension() const { return dimension_; }
  const Form& form() const { return form_; }
  bool is_cartesian() const { return std::holds_alternative<CartesianMass>(form_); }
  bool is_polar() const { return std::holds_alternative<DiagonalPolar>(form_); }
  bool is_diagonal() const { return !std::holds_alternative<GeneralSmooth>(form_); }
  Chart chart() const { return is_polar() ? Chart::polar : Chart::cartesian; }

  std::string form_name() const {
    static const char* names[] = {"cartesian_mass", "diagonal_polar", "general_smooth"};
    return names[form_.index()];
  }

  /// Mass parameter of the cartesian and polar forms; throws for general metrics.
  double mass() const {
    if (auto* c = std::get_if<CartesianMass>(&form_)) return c->m;
    if (auto* p = std::get_if<DiagonalPolar>(&form_)) return p->m;
    throw DomainError("metric: general form has no mass parameter");
  }

  Matrix at(const Vector& q) const {
    require_dimension(q.size(), dimension_, "metric");
    if (auto* c = std::get_if<CartesianMass>(&form_))
      return c->m * Matrix::Identity(dimension_, dimension_);
    if (auto* p = std::get_if<DiagonalPolar>(&form_)) {
      if (!(q[0] > 0)) throw DomainError("polar metric: requires r > 0");
      Matrix g = Matrix::Zero(2, 2);
      g(0, 0) = p->m;
      g(1, 1) = p->m * q[0] * q[0];
      return g;
    }
    Matrix g = std::get<GeneralSmooth>(form_).g(q);
    require_dimension(g.rows(), dimension_, "metric rows");
    require_dimension(g.cols(), dimension_, "metric cols");
    return g;
  }

  /// d[mu] = dg/dq^mu.
  std::vector<Matrix> derivatives(const Vector& q, const FiniteDifference& fd = {}) const {
    std::vector<Matrix> d(dimension_, Matrix::Zero(dimension_, dimension_));
    if (is_cartesian()) return d;
    if (auto* p = std::get_if<DiagonalPolar>(&form_)) {
      d[0](1, 1) = 2.0 * p->m * q[0];
      return d;
    }
    for (int mu = 0; mu < dimension_; ++mu)
      d[mu] = partial([&](const Vector& x) { return at(x); }, q, mu, fd);
    return d;
  }

  /// Levi-Civita symbols: gamma[alpha](beta, gamma).
  std::vector<Matrix> christoffel(const Vector& q, const FiniteDifference& fd = {}) const {
    const int k = dimension_;
    std::vector<Matrix> gamma(k, Matrix::Zero(k, k));
    if (is_cartesian()) return gamma;
    if (is_polar()) {
      const double r = q[0];
      if (!(r > 0)) throw DomainError("polar metric: requires r > 0");
      gamma[0](1, 1) = -r;
      gamma[1](0, 1) = gamma[1](1, 0) = 1.0 / r;
      return gamma;
    }
    return christoffel_from(at(q), derivatives(q, fd));
  }

  static std::vector<Matrix> christoffel_from(const Matrix& g, const std::vector<Matrix>& dg) {
    const auto k = g.rows();
    const Matrix ginv = g.inverse();
    std::vector<Matrix> gamma(k, Matrix::Zero(k, k));
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index b = 0; b < k; ++b)
        for (Eigen::Index c = 0; c < k; ++c) {
          double s = 0;
          for (Eigen::Index d = 0; d < k; ++d)
            s += ginv(a, d) * (dg[b](d, c) + dg[c](d, b) - dg[d](b, c));
          gamma[a](b, c) = 0.5 * s;
        }
    return gamma;
  }

 private:
  Form form_;
  int dimension_;
};

//--------------------------------------------------------------------------------------------------
// Mechanical system

using ParameterMap = std::map<std::string, double>;

/// A conservative system (g, V, E) on a k-dimensional configuration space.
class MechanicalSystem {
 public:
  MechanicalSystem(KineticMetric metric, PotentialField potential, double energy,
                   ParameterMap params = {})
      : metric_(std::move(metric)), potential_(std::move(potential)), energy_(energy),
        params_(std::move(params)) {
    if (metric_.dimension() != potential_.dimension())
      throw DimensionError("system: metric and potential dimensions differ");
    if (metric_.chart() != potential_.chart() &&
        !std::holds_alternative<FreePotential>(potential_.family()))
      throw DomainError("system: metric and potential use different charts");
    if (!std::isfinite(energy_)) throw DomainError("system: energy must be finite");
  }

  int dimension() const { return metric_.dimension(); }
  const KineticMetric& metric() const { return metric_; }
  const PotentialField& potential() const { return potential_; }
  double energy() const { return energy_; }
  const ParameterMap& params() const { return params_; }
  Chart chart() const { return metric_.chart(); }

  std::optional<double> param(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) return std::nullopt;
    return it->second;
  }

  /// E - V(q)
  double kinetic_budget(const Vector& q) const { return energy_ - potential_.value(q); }

  /// Confirms that Sigma is nonempty by testing a probe point.
  void require_probe(const Vector& probe) const {
    if (!(kinetic_budget(probe) > 0))
      throw DomainError("system: probe point is not in the allowed region E > V");
  }

  MechanicalSystem with_energy(double energy) const {
    return {metric_, potential_, energy, params_};
  }

 private:
  KineticMetric metric_;
  PotentialField potential_;
  double energy_;
  ParameterMap params_;
};

inline double evaluate_potential(const PotentialField& v, const Vector& q) { return v.value(q); }

inline Vector potential_gradient(const PotentialField& v, const Vector& q) { return v.gradient(q); }

/// True iff E - V(q) > 0. Points outside the potential's own domain are not members.
inline bool sigma_contains(const MechanicalSystem& system, const Vector& q) {
  try {
    return system.kinetic_budget(q) > 0;
  } catch (const DomainError&) {
    return false;
  }
}

struct RaySearch {
  double bound = 100.0;   // largest ray parameter scanned
  int samples = 20000;    // scan resolution before bisection
  double tolerance = 1e-10;
};

struct TurningPoints {
  std::vector<double> params;  // ray parameters where E - V changes sign, ascending
  bool unbounded = false;      // no crossing within the search bound
};

/// Boundary crossings of Sigma along q(t) = origin + t * direction, t > 0.
/// The scan stops early where the potential leaves its domain.
inline TurningPoints turning_points(const MechanicalSystem& system, const Vector& origin,
                                    const Vector& direction, const RaySearch& search = {}) {
  require_dimension(origin.size(), system.dimension(), "turning_points origin");
  require_dimension(direction.size(), system.dimension(), "turning_points direction");
  if (!sigma_contains(system, origin))
    throw DomainError("turning_points: ray must start inside the allowed region");
  auto budget = [&](double t) -> std::optional<double> {
    try {
      return system.kinetic_budget(origin + t * direction);
    } catch (const DomainError&) {
      return std::nullopt;
    }
  };
  TurningPoints out;
  const double dt = search.bound / search.samples;
  double t_prev = 0.0;
  double f_prev = *budget(0.0);
  for (int i = 1; i <= search.samples; ++i) {
    const double t = i * dt;
    const auto f = budget(t);
    if (!f) break;
    if ((f_prev > 0) != (*f > 0)) {
      double lo = t_prev, hi = t;
      const bool inside_lo = f_prev > 0;
      while (hi - lo > search.tolerance) {
        const double mid = 0.5 * (lo + hi);
        const auto fm = budget(mid);
        if (fm && ((*fm > 0) == inside_lo))
          lo = mid;
        else
          hi = mid;
      }
      out.params.push_back(0.5 * (lo + hi));
    }
    t_prev = t;
    f_prev = *f;
  }
  out.unbounded = out.params.empty();
  return out;
}

/// One-dimensional radial problem V_eff(r) = l^2 / (2 m r^2) + V(r) for a central
/// system with a cartesian or polar mass metric.
inline MechanicalSystem effective_radial_system(const MechanicalSystem& system,
                                                double angular_momentum) {
  if (!system.potential().is_central())
    throw DomainError("effective_radial_system: potential is not central");
  const double m = system.metric().mass();
  const double l = angular_momentum;
  auto v = std::make_shared<PotentialField>(system.potential());
  CentralPotential eff;
  eff.value = [v, m, l](double r) {
    if (!(r > 0)) throw DomainError("effective radial potential: requires r > 0");
    return l * l / (2 * m * r * r) + v->radial_value(r);
  };
  eff.first = [v, m, l](double r) {
    if (!(r > 0)) throw DomainError("effective radial potential: requires r > 0");
    return -l * l / (m * r * r * r) + v->radial_derivative(r);
  };
  eff.second = [v, m, l](double r) {
    if (!(r > 0)) throw DomainError("effective radial potential: requires r > 0");
    return 3 * l * l / (m * r * r * r * r) + v->radial_second_derivative(r);
  };
  ParameterMap params = system.params();
  params["angular_momentum"] = l;
  return {KineticMetric::cartesian(m, 1), PotentialField::central(std::move(eff), 1),
          system.energy(), std::move(params)};
}

}  // namespace topospec
