#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace memosort {

// Dense algebra for the filter's small matrices (at most 16x16). Backed by
// Eigen; all covariance math is 64-bit throughout.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Cholesky rejected the input (pivot <= 0 or asymmetric beyond tolerance).
struct NotSpdError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dimension-checked product.
Matrix matmul(const Matrix& a, const Matrix& b);

// Solves a * x = b for symmetric positive definite a via Cholesky, with one
// refinement pass so the residual stays below 1e-9 * ||b|| for conditioned
// inputs. Throws NotSpdError when the factorization fails.
Matrix spd_solve(const Matrix& a, const Matrix& b);

// v * v^T: symmetric PSD of rank at most one.
Matrix outer(const Vector& v);

// (m + m^T) / 2. Applied to covariances after every update to suppress
// asymmetry drift.
Matrix symmetrized(const Matrix& m);

}  // namespace memosort
