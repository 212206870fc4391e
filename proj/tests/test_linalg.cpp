#include <doctest.h>

#include <stdexcept>

#include "memosort/linalg.hpp"
#include "memosort/rng.hpp"

using memosort::Matrix;
using memosort::NotSpdError;
using memosort::Rng;
using memosort::Vector;

TEST_SUITE("linalg") {

TEST_CASE("matmul checks dimensions") {
  Matrix a(2, 3);
  a << 1, 2, 3, 4, 5, 6;
  Matrix b(3, 1);
  b << 1, 0, -1;
  const Matrix c = memosort::matmul(a, b);
  CHECK(c(0, 0) == -2.0);
  CHECK(c(1, 0) == -2.0);
  CHECK_THROWS_AS(memosort::matmul(a, Matrix::Zero(2, 2)),
                  std::invalid_argument);
}

TEST_CASE("spd_solve inverts a hand-checked 2x2") {
  Matrix a(2, 2);
  a << 2, 1, 1, 2;
  const Matrix inv = memosort::spd_solve(a, Matrix::Identity(2, 2));
  CHECK(inv(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(inv(0, 1) == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  CHECK(inv(1, 0) == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  CHECK(inv(1, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("spd_solve residuals stay small on random spd systems") {
  Rng rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + rng.uniform_int(12);
    Matrix g(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g(i, j) = rng.normal();
    const Matrix a =
        g * g.transpose() + 1e-6 * Matrix::Identity(n, n);
    Matrix b(n, 2);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 2; ++j) b(i, j) = rng.normal();
    const Matrix x = memosort::spd_solve(a, b);
    CHECK((a * x - b).norm() <= 1e-9 * (1.0 + b.norm()));
  }
}

TEST_CASE("spd_solve rejects bad inputs") {
  Matrix asym(2, 2);
  asym << 1, 2, 0, 1;
  CHECK_THROWS_AS(memosort::spd_solve(asym, Matrix::Identity(2, 2)),
                  NotSpdError);
  Matrix indef(2, 2);
  indef << 1, 0, 0, -1;
  CHECK_THROWS_AS(memosort::spd_solve(indef, Matrix::Identity(2, 2)),
                  NotSpdError);
  CHECK_THROWS_AS(memosort::spd_solve(Matrix::Identity(3, 2),
                                      Matrix::Identity(3, 3)),
                  NotSpdError);
  CHECK_THROWS_AS(memosort::spd_solve(Matrix::Identity(2, 2),
                                      Matrix::Identity(3, 3)),
                  std::invalid_argument);
}

TEST_CASE("outer and symmetrized") {
  Vector v(2);
  v << 1, 2;
  const Matrix m = memosort::outer(v);
  CHECK(m(0, 0) == 1.0);
  CHECK(m(0, 1) == 2.0);
  CHECK(m(1, 0) == 2.0);
  CHECK(m(1, 1) == 4.0);
  CHECK_THROWS_AS(memosort::outer(Vector()), std::invalid_argument);

  Matrix n(2, 2);
  n << 0, 4, 2, 6;
  const Matrix s = memosort::symmetrized(n);
  CHECK(s(0, 1) == 3.0);
  CHECK(s(1, 0) == 3.0);
  CHECK(s(0, 0) == 0.0);
  // outer products are exactly PSD-symmetric already
  CHECK((memosort::symmetrized(m) - m).norm() == 0.0);
}

}  // TEST_SUITE
