#include "memosort/linalg.hpp"

namespace memosort {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions disagree");
  }
  return a * b;
}

Matrix spd_solve(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols()) throw NotSpdError("spd_solve: matrix not square");
  if (a.rows() != b.rows()) {
    throw std::invalid_argument("spd_solve: right-hand side has wrong row count");
  }
  const double scale = a.cwiseAbs().maxCoeff();
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (scale + 1.0)) {
    throw NotSpdError("spd_solve: matrix not symmetric");
  }
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NotSpdError("spd_solve: Cholesky factorization failed");
  }
  Matrix x = llt.solve(b);
  x += llt.solve(b - a * x);
  return x;
}

Matrix outer(const Vector& v) {
  if (v.size() == 0) throw std::invalid_argument("outer: empty vector");
  return v * v.transpose();
}

Matrix symmetrized(const Matrix& m) {
  return 0.5 * (m + m.transpose());
}

}  // namespace memosort
