#include "topospec/exterior.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace topospec;

namespace {

Vector random_vector(int k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  Vector v(k);
  for (auto& x : v) x = u(rng);
  return v;
}

Matrix random_antisymmetric(int k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  Matrix m = Matrix::Zero(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      m(i, j) = u(rng);
      m(j, i) = -m(i, j);
    }
  return m;
}

}  // namespace

TEST(Form, OneFormsAnticommute) {
  std::mt19937_64 rng(1);
  for (int k = 2; k <= 4; ++k) {
    const Form a = Form::one_form(random_vector(k, rng));
    const Form b = Form::one_form(random_vector(k, rng));
    EXPECT_LT((wedge(a, b) + wedge(b, a)).max_abs(), 1e-15);
    EXPECT_LT(wedge(a, a).max_abs(), 1e-15);
  }
}

TEST(Form, WedgeOfBasisIsVolume) {
  const Matrix I = Matrix::Identity(4, 4);
  Form vol = Form::scalar(4, 1.0);
  for (int i = 0; i < 4; ++i) vol = wedge(vol, Form::one_form(I.col(i)));
  EXPECT_EQ(vol.top(), 1.0);
  // dq2 ^ dq1 ^ dq3 ^ dq4 = -vol
  Form swapped = wedge(Form::one_form(I.col(1)), Form::one_form(I.col(0)));
  swapped = wedge(wedge(swapped, Form::one_form(I.col(2))), Form::one_form(I.col(3)));
  EXPECT_EQ(swapped.top(), -1.0);
}

TEST(Form, WedgeIsAssociative) {
  std::mt19937_64 rng(2);
  const Form a = Form::one_form(random_vector(4, rng));
  const Form b = Form::two_form(random_antisymmetric(4, rng));
  const Form c = Form::one_form(random_vector(4, rng));
  EXPECT_LT((wedge(wedge(a, b), c) - wedge(a, wedge(b, c))).max_abs(), 1e-14);
}

TEST(Form, TwoFormWedgeMatchesPfaffianExpansion) {
  std::mt19937_64 rng(3);
  const Matrix A = random_antisymmetric(4, rng);
  const Matrix B = random_antisymmetric(4, rng);
  const double expected = A(0, 1) * B(2, 3) - A(0, 2) * B(1, 3) + A(0, 3) * B(1, 2) +
                          A(1, 2) * B(0, 3) - A(1, 3) * B(0, 2) + A(2, 3) * B(0, 1);
  EXPECT_NEAR(wedge(Form::two_form(A), Form::two_form(B)).top(), expected, 1e-14);
}

TEST(Form, DegreeAboveDimensionVanishes) {
  std::mt19937_64 rng(4);
  const Form a = Form::two_form(random_antisymmetric(3, rng));
  EXPECT_EQ(wedge(a, a).max_abs(), 0.0);
  EXPECT_THROW(Form(5), DimensionError);
}
