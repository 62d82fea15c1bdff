#pragma once

// Exterior algebra over a coordinate cobasis dq^1..dq^k, k <= 4.
// A form is stored by its components on the basis monomials dq^I, I a strictly
// increasing index set encoded as a bitmask.

#include "topospec/types.hpp"

#include <array>
#include <bit>
#include <cmath>

namespace topospec {

class Form {
 public:
  static constexpr int max_dimension = 4;

  explicit Form(int dimension) : dimension_(dimension) {
    if (dimension < 1 || dimension > max_dimension)
      throw DimensionError("exterior algebra supports 1 <= k <= 4");
    components_.fill(0.0);
  }

  static Form scalar(int dimension, double c) {
    Form f(dimension);
    f.components_[0] = c;
    return f;
  }

  static Form one_form(const Vector& coefficients) {
    Form f(static_cast<int>(coefficients.size()));
    for (int i = 0; i < f.dimension_; ++i) f.components_[1u << i] = coefficients[i];
    return f;
  }

  /// Two-form 1/2 F_{mu nu} dq^mu ^ dq^nu from an antisymmetric matrix F.
  static Form two_form(const Matrix& F) {
    Form f(static_cast<int>(F.rows()));
    for (int i = 0; i < f.dimension_; ++i)
      for (int j = i + 1; j < f.dimension_; ++j) f.components_[(1u << i) | (1u << j)] = F(i, j);
    return f;
  }

  int dimension() const { return dimension_; }

  double operator[](unsigned mask) const { return components_[mask]; }
  double& operator[](unsigned mask) { return components_[mask]; }

  /// Coefficient of dq^1 ^ ... ^ dq^k.
  double top() const { return components_[full_mask()]; }

  /// Part of homogeneous degree p.
  Form degree_part(int p) const {
    Form out(dimension_);
    for (unsigned m = 0; m <= full_mask(); ++m)
      if (std::popcount(m) == p) out.components_[m] = components_[m];
    return out;
  }

  double max_abs() const {
    double s = 0;
    for (unsigned m = 0; m <= full_mask(); ++m) s = std::max(s, std::abs(components_[m]));
    return s;
  }

  Form& operator+=(const Form& o) {
    check(o);
    for (unsigned m = 0; m <= full_mask(); ++m) components_[m] += o.components_[m];
    return *this;
  }
  Form& operator-=(const Form& o) {
    check(o);
    for (unsigned m = 0; m <= full_mask(); ++m) components_[m] -= o.components_[m];
    return *this;
  }
  Form& operator*=(double s) {
    for (auto& c : components_) c *= s;
    return *this;
  }

  friend Form operator+(Form a, const Form& b) { return a += b; }
  friend Form operator-(Form a, const Form& b) { return a -= b; }
  friend Form operator*(Form a, double s) { return a *= s; }
  friend Form operator*(double s, Form a) { return a *= s; }
  friend Form operator-(Form a) { return a *= -1.0; }

  friend Form wedge(const Form& a, const Form& b) {
    a.check(b);
    Form out(a.dimension_);
    const unsigned full = a.full_mask();
    for (unsigned ma = 0; ma <= full; ++ma) {
      if (a.components_[ma] == 0.0) continue;
      for (unsigned mb = 0; mb <= full; ++mb) {
        if ((ma & mb) != 0 || b.components_[mb] == 0.0) continue;
        out.components_[ma | mb] += reorder_sign(ma, mb) * a.components_[ma] * b.components_[mb];
      }
    }
    return out;
  }

 private:
  unsigned full_mask() const { return (1u << dimension_) - 1u; }

  void check(const Form& o) const {
    if (o.dimension_ != dimension_) throw DimensionError("forms over different dimensions");
  }

  // Sign of the permutation sorting the concatenation (I, J) into increasing order.
  static double reorder_sign(unsigned ma, unsigned mb) {
    int inversions = 0;
    for (unsigned i = 0; i < max_dimension; ++i)
      if (ma & (1u << i)) inversions += std::popcount(mb & ((1u << i) - 1u));
    return (inversions & 1) ? -1.0 : 1.0;
  }

  int dimension_;
  std::array<double, 1u << max_dimension> components_{};
};

}  // namespace topospec
