#pragma once

// Topological-spectrum relations f(lambda) = n for the oscillator and the Kepler
// problem, and a bracketing solver for the parameter at a given level.

#include "topospec/characteristic_classes.hpp"
#include "topospec/csv.hpp"
#include "topospec/scalar_fields.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace topospec {

//--------------------------------------------------------------------------------------------------
// Harmonic oscillator

/// k q0 / (k q0^2 - 2E). The limit q0 -> -infinity is 0.
inline double ho_topological_spectrum(double k_spring, double energy, double q0) {
  if (std::isinf(q0)) return 0.0;
  return euler_integral_ho_reduced(k_spring, energy, q0);
}

struct HOSpectrumParams {
  int n = 0;
  double m = 1, k_spring = 1, hbar = 1;
  double omega = 1;   // sqrt(k / m)
  double energy = 0;  // hbar omega (n + 1/2)
  double C = 0;       // 2 (E / (hbar omega) - 1/2) = 2n
  double q0 = 0;      // 1/C - sqrt(1/C^2 + 2E/k); -infinity at n = 0
  bool limit = false;
  std::string diagnosis;
};

/// Chooses E = hbar omega (n + 1/2), C = 2n and q0 so that the oscillator
/// spectrum equals n. At n = 0 the choice degenerates (C = 0); the limit
/// q0 -> -infinity is reported instead.
inline HOSpectrumParams ho_canonical_map(int n, double m, double k_spring, double hbar) {
  if (n < 0) throw DomainError("canonical map: level must be non-negative");
  if (!(m > 0) || !(k_spring > 0) || !(hbar > 0))
    throw DomainError("canonical map: m, k and hbar must be positive");
  HOSpectrumParams p;
  p.n = n;
  p.m = m;
  p.k_spring = k_spring;
  p.hbar = hbar;
  p.omega = std::sqrt(k_spring / m);
  p.energy = hbar * p.omega * (n + 0.5);
  p.C = 2.0 * (p.energy / (hbar * p.omega) - 0.5);
  if (n == 0) {
    p.q0 = -std::numeric_limits<double>::infinity();
    p.limit = true;
    p.diagnosis = "C = 0: q0 = 1/C - sqrt(1/C^2 + 2E/k) tends to -infinity and the spectrum to 0";
    return p;
  }
  const double inv = 1.0 / p.C;
  p.q0 = inv - std::sqrt(inv * inv + 2.0 * p.energy / k_spring);
  return p;
}

//--------------------------------------------------------------------------------------------------
// Kepler problem

struct ApsidalRadii {
  double r_minus = 0, r_plus = 0;
  double x = 0;  // 2 |E| l^2 / (m alpha^2)
};

inline double kepler_x(double m, double alpha, double l, double energy) {
  return 2.0 * std::abs(energy) * l * l / (m * alpha * alpha);
}

/// Radial turning points (alpha / 2|E|)(1 -/+ sqrt(1 - x)) of a bound orbit.
inline ApsidalRadii kepler_apsidal(double m, double alpha, double l, double energy) {
  if (!(energy < 0)) throw DomainError("apsidal radii: closed orbits need E < 0");
  if (!(m > 0) || !(alpha > 0)) throw DomainError("apsidal radii: m and alpha must be positive");
  ApsidalRadii a;
  a.x = kepler_x(m, alpha, l, energy);
  if (a.x > 1.0 + 1e-12) throw DomainError("apsidal radii: x > 1, no real turning points");
  const double s = std::sqrt(std::max(0.0, 1.0 - a.x));
  const double scale = alpha / (2.0 * std::abs(energy));
  a.r_plus = scale * (1.0 + s);
  a.r_minus = scale * a.x / (1.0 + s);  // = scale (1 - s) without cancellation
  return a;
}

struct KeplerSpectrum {
  double x = 0;
  ApsidalRadii radii;
  double printed_value = 0;          // -x / sqrt(1 - x), as printed
  double boundary_term_value = 0;  // boundary term at r+ minus at r-, = -2 sqrt(1 - x) / x
};

/// Both the printed closed form and the boundary-term evaluation, which differ
/// by more than a reciprocal; see the README.
inline KeplerSpectrum kepler_spectrum(double m, double alpha, double l, double energy) {
  KeplerSpectrum s;
  s.radii = kepler_apsidal(m, alpha, l, energy);
  s.x = s.radii.x;
  if (!(s.x > 0)) throw DomainError("kepler spectrum: l = 0 gives x = 0 and a collision orbit");
  s.printed_value = s.x >= 1.0 ? -std::numeric_limits<double>::infinity()
                             : -s.x / std::sqrt(1.0 - s.x);
  const MechanicalSystem system(KineticMetric::cartesian(m, 2), PotentialField::kepler(alpha, 2),
                                energy);
  s.boundary_term_value = central_field_boundary_term(system, s.radii.r_plus) -
                          central_field_boundary_term(system, s.radii.r_minus);
  return s;
}

//--------------------------------------------------------------------------------------------------
// Relations and level solving

struct ParameterRange {
  std::string name;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  bool open = true;  // exclude the end points
};

class SpectrumRelation {
 public:
  using Function = std::function<double(const ParameterMap&)>;

  SpectrumRelation(std::string name, std::vector<ParameterRange> params, Function f)
      : name_(std::move(name)), params_(std::move(params)), f_(std::move(f)) {}

  const std::string& name() const { return name_; }
  const std::vector<ParameterRange>& parameters() const { return params_; }

  const ParameterRange& range(const std::string& param) const {
    for (const auto& p : params_)
      if (p.name == param) return p;
    throw DomainError("relation " + name_ + ": unknown parameter '" + param + "'");
  }

  double operator()(const ParameterMap& values) const {
    for (const auto& p : params_) {
      auto it = values.find(p.name);
      if (it == values.end())
        throw DomainError("relation " + name_ + ": missing parameter '" + p.name + "'");
      const double v = it->second;
      const bool inside = p.open ? (v > p.lower && v < p.upper) : (v >= p.lower && v <= p.upper);
      if (!std::isfinite(v) || !inside)
        throw DomainError("relation " + name_ + ": parameter '" + p.name + "' = " +
                          format_number(v) + " is outside its admissible range");
    }
    return f_(values);
  }

 private:
  std::string name_;
  std::vector<ParameterRange> params_;
  Function f_;
};

inline constexpr double unbounded = std::numeric_limits<double>::infinity();

/// k q0 / (k q0^2 - 2E) over (k, energy, q0).
inline SpectrumRelation ho_relation() {
  return {"ho",
          {{"k", 0, unbounded}, {"energy", 0, unbounded}, {"q0", -unbounded, unbounded}},
          [](const ParameterMap& p) {
            return ho_topological_spectrum(p.at("k"), p.at("energy"), p.at("q0"));
          }};
}

inline std::vector<ParameterRange> kepler_ranges() {
  return {{"m", 0, unbounded}, {"alpha", 0, unbounded}, {"l", 0, unbounded},
          {"abs_energy", 0, unbounded}};
}

/// -x / sqrt(1 - x), the printed form.
inline SpectrumRelation kepler_printed_relation() {
  return {"kepler_printed", kepler_ranges(), [](const ParameterMap& p) {
            return kepler_spectrum(p.at("m"), p.at("alpha"), p.at("l"), -p.at("abs_energy"))
                .printed_value;
          }};
}

/// Boundary-term difference -2 sqrt(1 - x) / x.
inline SpectrumRelation kepler_boundary_relation() {
  return {"kepler_boundary", kepler_ranges(), [](const ParameterMap& p) {
            return kepler_spectrum(p.at("m"), p.at("alpha"), p.at("l"), -p.at("abs_energy"))
                .boundary_term_value;
          }};
}

struct LevelSolution {
  double value = 0;     // solved parameter
  double f_value = 0;   // relation at the solution
  double residual = 0;  // f_value - level
  bool monotone = true;
  std::vector<std::string> warnings;
};

/// Solves relation(fixed + {free_param: x}) = level for x in [lo, hi] by bisection
/// to relative 1e-12 in x. Monotonicity is checked on 64 samples; a violation is
/// reported as a warning.
inline LevelSolution solve_level(const SpectrumRelation& relation, double level,
                                 const ParameterMap& fixed, const std::string& free_param,
                                 double lo, double hi) {
  relation.range(free_param);
  if (!(lo < hi)) throw DomainError("solve_level: bracket must satisfy lo < hi");
  ParameterMap values = fixed;
  auto g = [&](double x) {
    values[free_param] = x;
    return relation(values) - level;
  };
  LevelSolution sol;
  constexpr int samples = 64;
  double prev = g(lo);
  int direction = 0;
  for (int i = 1; i <= samples; ++i) {
    const double cur = g(lo + (hi - lo) * i / samples);
    const int d = cur > prev ? 1 : (cur < prev ? -1 : 0);
    if (d != 0) {
      if (direction != 0 && d != direction) sol.monotone = false;
      direction = d;
    }
    prev = cur;
  }
  if (!sol.monotone)
    sol.warnings.push_back("relation is not monotone in '" + free_param + "' over the bracket");

  double a = lo, b = hi, ga = g(lo), gb = g(hi);
  if (ga == 0) b = a;
  else if (gb == 0) a = b;
  else if ((ga > 0) == (gb > 0))
    throw NumericalError("solve_level: no sign change of f - n over [" + format_number(lo) + ", " +
                         format_number(hi) + "]");
  while (b - a > 1e-12 * std::max(std::abs(a), std::abs(b)) && b - a > 1e-300) {
    const double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;
    const double gm = g(mid);
    if (gm == 0) {
      a = b = mid;
      break;
    }
    if ((gm > 0) == (ga > 0)) {
      a = mid;
      ga = gm;
    } else {
      b = mid;
    }
  }
  sol.value = 0.5 * (a + b);
  sol.residual = g(sol.value);
  sol.f_value = sol.residual + level;
  return sol;
}

struct SpectrumTableRow {
  double n;
  std::string param_name;
  double param_value;
  double f_value;
  double residual;
};

/// Columns: n,param_name,param_value,f_value,residual
inline void write_spectrum_csv(std::ostream& out, const std::vector<SpectrumTableRow>& rows) {
  CsvWriter csv(out);
  csv.header({"n", "param_name", "param_value", "f_value", "residual"});
  for (const auto& r : rows)
    csv.row_strings({format_number(r.n), r.param_name, format_number(r.param_value),
                     format_number(r.f_value), format_number(r.residual)});
}

}  // namespace topospec
