#pragma once

#include "topospec/scalar_fields.hpp"

#include <initializer_list>

namespace topospec::fixtures {

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline MechanicalSystem free_system(int k, double energy, double m = 1.0) {
  return {KineticMetric::cartesian(m, k), PotentialField::free(k), energy};
}

inline MechanicalSystem harmonic_system(std::vector<double> springs, double energy, double m = 1.0) {
  const int k = static_cast<int>(springs.size());
  return {KineticMetric::cartesian(m, k), PotentialField::harmonic(std::move(springs)), energy};
}

inline MechanicalSystem kepler_cartesian(double m, double alpha, double energy) {
  return {KineticMetric::cartesian(m, 2), PotentialField::kepler(alpha, 2), energy};
}

inline MechanicalSystem kepler_polar(double m, double alpha, double energy) {
  return {KineticMetric::polar(m), PotentialField::kepler(alpha, 2, Chart::polar), energy};
}

}  // namespace topospec::fixtures
