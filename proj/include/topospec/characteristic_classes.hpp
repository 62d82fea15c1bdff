#pragma once

// Euler and Pontrjagin densities built from the curvature two-form, and their
// integrals over regularized subdomains of the allowed region.

#include "topospec/csv.hpp"
#include "topospec/exterior.hpp"
#include "topospec/jacobi_geometry.hpp"
#include "topospec/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

namespace topospec {

//--------------------------------------------------------------------------------------------------
// Densities

/// R_ab as coordinate two-forms.
inline std::vector<Form> curvature_forms(const CurvatureForm& r) {
  const int k = r.dimension();
  std::vector<Form> out;
  out.reserve(k * k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) out.push_back(Form::two_form(r.two_form(a, b)));
  return out;
}

/// Coefficient rho of e = rho dq^1 ^ ... ^ dq^k, with e = (-1)^m Pf(R) / (2 pi)^m, m = k/2.
inline double euler_density(const CurvatureForm& r) {
  const int k = r.dimension();
  if (k % 2 != 0) throw DimensionError("euler density: vanishes unless the dimension is even");
  const auto R = curvature_forms(r);
  auto at = [&](int a, int b) -> const Form& { return R[a * k + b]; };
  const double two_pi = 2.0 * std::numbers::pi;
  if (k == 2) return -at(0, 1).top() / two_pi;
  const Form pf = wedge(at(0, 1), at(2, 3)) - wedge(at(0, 2), at(1, 3)) + wedge(at(0, 3), at(1, 2));
  return pf.top() / (two_pi * two_pi);
}

inline double euler_density(const MechanicalSystem& system, const Vector& q,
                            Branch branch = Branch::automatic, const FiniteDifference& fd = {}) {
  if (system.dimension() % 2 != 0)
    throw DimensionError("euler density: vanishes unless the dimension is even");
  return euler_density(curvature_two_form(system, q, branch, fd));
}

/// p[j] is the degree-4j invariant form: the coefficient of t^(k-2j) in Det(t I - R / 2 pi).
struct PontrjaginSet {
  std::vector<Form> p;

  int dimension() const { return p.front().dimension(); }
  /// Coefficient of dq^1 ^ ... ^ dq^k of p_j (zero unless 4j == k).
  double top(int j) const { return p.at(j).top(); }
};

inline PontrjaginSet pontrjagin_forms(const CurvatureForm& r) {
  const int k = r.dimension();
  if (k > 4) throw DimensionError("pontrjagin forms: supported for k <= 4");
  const auto R = curvature_forms(r);
  const double scale = -1.0 / (2.0 * std::numbers::pi);

  // polynomial in t with form coefficients: poly[n] multiplies t^n
  using Poly = std::vector<Form>;
  auto multiply = [k](const Poly& a, const Poly& b) {
    Poly out(a.size() + b.size() - 1, Form(k));
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += wedge(a[i], b[j]);
    return out;
  };

  Poly det(k + 1, Form(k));
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    int inversions = 0;
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) inversions += perm[i] > perm[j];
    Poly term{Form::scalar(k, inversions % 2 ? -1.0 : 1.0)};
    for (int i = 0; i < k; ++i) {
      Poly entry{scale * R[i * k + perm[i]]};
      if (perm[i] == i) entry.push_back(Form::scalar(k, 1.0));
      term = multiply(term, entry);
    }
    for (std::size_t n = 0; n < term.size(); ++n) det[n] += term[n];
  } while (std::next_permutation(perm.begin(), perm.end()));

  PontrjaginSet set;
  for (int j = 0; 2 * j <= k; ++j) {
    if (4 * j > k) {
      set.p.emplace_back(k);  // degree exceeds the dimension
      continue;
    }
    set.p.push_back(det[k - 2 * j].degree_part(4 * j));
  }
  return set;
}

inline PontrjaginSet pontrjagin_forms(const MechanicalSystem& system, const Vector& q,
                                      Branch branch = Branch::automatic,
                                      const FiniteDifference& fd = {}) {
  if (system.dimension() > 4) throw DimensionError("pontrjagin forms: supported for k <= 4");
  return pontrjagin_forms(curvature_two_form(system, q, branch, fd));
}

//--------------------------------------------------------------------------------------------------
// Regularized integration

/// Axis-aligned box in the system's own coordinates.
struct BoxRegion {
  Vector lower, upper;
};

/// r_inner <= |q| <= r_outer about the origin of a two-dimensional cartesian chart.
struct AnnulusRegion {
  double r_inner = 0.0, r_outer = 1.0;
};

/// r_inner <= r <= r_outer in a polar chart; the angular integral contributes 2 pi.
struct RadialRegion {
  double r_inner = 0.0, r_outer = 1.0;
};

using RegionShape = std::variant<BoxRegion, AnnulusRegion, RadialRegion>;

struct RegularizedDomain {
  RegionShape shape;
  double epsilon = 0.0;      // nodes with E - V < epsilon contribute nothing
  double inset = 0.0;        // every boundary is pulled inward by this distance
  bool extrapolate = false;  // also evaluate at (epsilon, inset) / 2 and / 4, then extrapolate
  QuadratureOptions quadrature{};
  int grid_panels = 2;       // Gauss panels per axis for four-dimensional boxes
  int grid_order = 8;
  Branch branch = Branch::automatic;
  FiniteDifference fd{};
};

struct RegularizationSample {
  double epsilon = 0.0;
  double inset = 0.0;
  double value = 0.0;
  double error = 0.0;
};

struct EulerIntegralReport {
  double value = 0.0;
  double error_estimate = 0.0;
  bool converged = true;
  std::string verdict;
  std::vector<RegularizationSample> samples;
};

namespace detail {

inline RegularizationSample integrate_euler_once(const MechanicalSystem& system,
                                                 const RegularizedDomain& domain, double epsilon,
                                                 double inset, bool& converged) {
  const int k = system.dimension();
  auto density = [&](const Vector& q) {
    double b;
    try {
      b = system.kinetic_budget(q);
    } catch (const DomainError&) {
      return 0.0;
    }
    if (!(b > 0) || b < epsilon) return 0.0;
    return euler_density(system, q, domain.branch, domain.fd);
  };
  RegularizationSample s{epsilon, inset, 0.0, 0.0};
  const auto& opt = domain.quadrature;

  if (const auto* box = std::get_if<BoxRegion>(&domain.shape)) {
    require_dimension(box->lower.size(), k, "box lower");
    require_dimension(box->upper.size(), k, "box upper");
    const Vector lo = box->lower.array() + inset, hi = box->upper.array() - inset;
    if ((hi - lo).minCoeff() <= 0) throw DomainError("euler integral: inset box is empty");
    if (k == 2) {
      const auto r = integrate_iterated(
          [&](double x, double y) {
            Vector q(2);
            q << x, y;
            return density(q);
          },
          lo[0], hi[0], [&](double) { return lo[1]; }, [&](double) { return hi[1]; }, opt);
      s.value = r.value;
      s.error = r.error;
      converged = converged && r.converged;
      return s;
    }
    // tensor Gauss grid; the difference from a coarser grid serves as error estimate
    auto tensor = [&](int panels) {
      const auto& rule = gauss_legendre(domain.grid_order);
      const int per_axis = panels * domain.grid_order;
      std::vector<std::vector<double>> nodes(k), weights(k);
      for (int a = 0; a < k; ++a) {
        const double width = (hi[a] - lo[a]) / panels;
        for (int p = 0; p < panels; ++p)
          for (int i = 0; i < domain.grid_order; ++i) {
            nodes[a].push_back(lo[a] + width * (p + 0.5 * (1.0 + rule.nodes[i])));
            weights[a].push_back(0.5 * width * rule.weights[i]);
          }
      }
      long total = 1;
      for (int a = 0; a < k; ++a) total *= per_axis;
      std::vector<double> terms(total);
      Vector q(k);
      for (long idx = 0; idx < total; ++idx) {
        long rem = idx;
        double w = 1.0;
        for (int a = k - 1; a >= 0; --a) {
          const int i = static_cast<int>(rem % per_axis);
          rem /= per_axis;
          q[a] = nodes[a][i];
          w *= weights[a][i];
        }
        terms[idx] = w * density(q);
      }
      return pairwise_sum(terms);
    };
    s.value = tensor(domain.grid_panels);
    s.error = std::abs(s.value - tensor(std::max(1, domain.grid_panels / 2)));
    return s;
  }

  if (const auto* ann = std::get_if<AnnulusRegion>(&domain.shape)) {
    if (k != 2 || system.chart() != Chart::cartesian)
      throw DomainError("euler integral: annulus regions need a two-dimensional cartesian chart");
    const double r0 = ann->r_inner > 0 ? ann->r_inner + inset : 0.0;
    const double r1 = ann->r_outer - inset;
    if (!(r1 > r0)) throw DomainError("euler integral: inset annulus is empty");
    const auto r = integrate_iterated(
        [&](double rad, double ang) {
          Vector q(2);
          q << rad * std::cos(ang), rad * std::sin(ang);
          return rad * density(q);
        },
        r0, r1, [](double) { return 0.0; }, [](double) { return 2.0 * std::numbers::pi; }, opt);
    s.value = r.value;
    s.error = r.error;
    converged = converged && r.converged;
    return s;
  }

  const auto& rad = std::get<RadialRegion>(domain.shape);
  if (k != 2 || system.chart() != Chart::polar)
    throw DomainError("euler integral: radial regions need a polar chart");
  const double r0 = rad.r_inner + inset, r1 = rad.r_outer - inset;
  if (!(r1 > r0) || !(r0 > 0)) throw DomainError("euler integral: radial interval is empty");
  const auto r = integrate_adaptive(
      [&](double x) {
        Vector q(2);
        q << x, 0.0;
        return density(q);
      },
      r0, r1, opt);
  s.value = 2.0 * std::numbers::pi * r.value;
  s.error = 2.0 * std::numbers::pi * r.error;
  converged = converged && r.converged;
  return s;
}

}  // namespace detail

/// Integral of the Euler density over the regularized domain. With extrapolation
/// the regularization (epsilon, inset) is halved twice and the sequence is
/// Richardson-extrapolated; a sequence that does not contract is reported as
/// non-convergent rather than forced to a number.
inline EulerIntegralReport integrate_euler(const MechanicalSystem& system,
                                           const RegularizedDomain& domain) {
  if (system.dimension() % 2 != 0)
    throw DimensionError("euler integral: vanishes unless the dimension is even");
  if (domain.epsilon < 0 || domain.inset < 0)
    throw DomainError("euler integral: epsilon and inset must be non-negative");
  EulerIntegralReport report;
  bool quad_ok = true;
  const int levels = domain.extrapolate ? 3 : 1;
  for (int i = 0; i < levels; ++i) {
    const double f = std::ldexp(1.0, -i);
    report.samples.push_back(
        detail::integrate_euler_once(system, domain, domain.epsilon * f, domain.inset * f, quad_ok));
  }
  const auto& last = report.samples.back();
  report.value = last.value;
  report.error_estimate = last.error;
  report.verdict = "single evaluation";
  if (domain.extrapolate) {
    const double v0 = report.samples[0].value, v1 = report.samples[1].value, v2 = last.value;
    const double d1 = v1 - v0, d2 = v2 - v1;
    const double negligible = 1e-12 * std::max(1.0, std::abs(v2)) + last.error;
    if (std::abs(d2) <= negligible && std::abs(d1) <= negligible) {
      report.verdict = "insensitive to the regularization";
    } else if (std::abs(d2) < 0.75 * std::abs(d1)) {
      const double r1 = 2 * v1 - v0, r2 = 2 * v2 - v1;
      report.value = (4 * r2 - r1) / 3;
      report.error_estimate = std::abs(report.value - r2) + last.error;
      report.verdict = "extrapolated";
    } else {
      report.converged = false;
      report.error_estimate = std::abs(d2) + last.error;
      report.verdict = "non-convergent: values do not settle as the regularization shrinks";
    }
  }
  if (!quad_ok) {
    report.converged = false;
    report.verdict += "; quadrature did not reach its tolerance";
  }
  return report;
}

/// Columns: epsilon,value,error_estimate. An extrapolated result is listed last with epsilon 0.
inline void write_euler_report_csv(std::ostream& out, const EulerIntegralReport& report) {
  CsvWriter csv(out);
  csv.header({"epsilon", "value", "error_estimate"});
  for (const auto& s : report.samples) csv.row({s.epsilon, s.value, s.error});
  if (report.samples.size() > 1) csv.row({0.0, report.value, report.error_estimate});
}

//--------------------------------------------------------------------------------------------------
// Reduced oscillator and central fields

/// Density of the reduced one-dimensional oscillator integral:
/// -(k / 4 pi) * angular_factor * (E + k q^2 / 2) / (E - k q^2 / 2)^2.
/// angular_factor stands in for the integral over the second coordinate (pi by convention).
inline double ho_reduced_density(double k_spring, double energy, double q,
                                 double angular_factor = std::numbers::pi) {
  const double half = 0.5 * k_spring * q * q;
  const double b = energy - half;
  if (b == 0.0) throw DomainError("reduced oscillator density: singular at E = k q^2 / 2");
  return -k_spring / (4.0 * std::numbers::pi) * angular_factor * (energy + half) / (b * b);
}

/// Quadrature of ho_reduced_density over [-q0, q0].
inline QuadratureResult integrate_ho_reduced(double k_spring, double energy, double q0,
                                             double angular_factor = std::numbers::pi,
                                             const QuadratureOptions& opt = {}) {
  if (std::abs(0.5 * k_spring * q0 * q0) >= energy)
    throw DomainError("reduced oscillator quadrature: [-q0, q0] must lie inside the allowed region");
  return integrate_adaptive(
      [&](double q) { return ho_reduced_density(k_spring, energy, q, angular_factor); }, -q0, q0,
      opt);
}

/// Closed form k q0 / (k q0^2 - 2E) of the reduced integral with angular factor pi.
inline double euler_integral_ho_reduced(double k_spring, double energy, double q0) {
  const double den = k_spring * q0 * q0 - 2.0 * energy;
  if (std::abs(den) <= 1e-14 * std::max({1.0, std::abs(2.0 * energy), k_spring * q0 * q0}))
    throw DomainError("reduced oscillator integral: singular at k q0^2 = 2E");
  return k_spring * q0 / den;
}

/// -1/2 r V'(r) / (E - V(r)); the Euler integral over an annulus is the difference
/// of this term between the outer and inner radius.
inline double central_field_boundary_term(const MechanicalSystem& system, double r) {
  const auto& v = system.potential();
  if (!v.is_central()) throw DomainError("boundary term: potential is not central");
  const double b = system.energy() - v.radial_value(r);
  if (!(b > 1e-12 * std::max(1.0, std::abs(system.energy()))))
    throw DomainError("boundary term: E - V vanishes or is negative at r = " + format_number(r));
  return -0.5 * r * v.radial_derivative(r) / b;
}

}  // namespace topospec
