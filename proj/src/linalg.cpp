#include "streamid/linalg.hpp"

#include <Eigen/SVD>

#include <algorithm>

namespace streamid {

LeastSquares solve_least_squares(const Matrix& a, const Matrix& b, double rel_tol) {
  require(a.rows() == b.rows(), ErrorKind::Numerical, "least squares: row mismatch");
  LeastSquares out;
  if (a.cols() == 0) {
    out.x = Matrix::Zero(0, b.cols());
    return out;
  }
  if (a.rows() == 0 || a.cwiseAbs().maxCoeff() == 0.0) {
    out.x = Matrix::Zero(a.cols(), b.cols());
    out.degraded = true;
    return out;
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod;
  cod.setThreshold(rel_tol);
  cod.compute(a);
  out.rank = cod.rank();
  out.degraded = out.rank < a.cols();
  out.x = cod.solve(b);
  return out;
}

Matrix pseudo_inverse(const Matrix& a, double rel_tol, Index* rank) {
  if (a.size() == 0) {
    if (rank) *rank = 0;
    return Matrix::Zero(a.cols(), a.rows());
  }
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double cut = sv.size() > 0 ? rel_tol * sv(0) : 0.0;
  Vector inv = Vector::Zero(sv.size());
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cut && sv(i) > 0.0) {
      inv(i) = 1.0 / sv(i);
      ++r;
    }
  }
  if (rank) *rank = r;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix symmetric_pseudo_inverse(const Matrix& s, double rel_tol, Index* rank) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
  const Vector& ev = eig.eigenvalues();
  const double top = ev.size() > 0 ? ev.cwiseAbs().maxCoeff() : 0.0;
  Vector inv = Vector::Zero(ev.size());
  Index r = 0;
  for (Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev(i)) > rel_tol * top && ev(i) != 0.0) {
      inv(i) = 1.0 / ev(i);
      ++r;
    }
  }
  if (rank) *rank = r;
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

Index numerical_rank(const Matrix& a, double rel_tol) {
  if (a.size() == 0) return 0;
  Eigen::BDCSVD<Matrix> svd(a);
  const Vector& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  return static_cast<Index>(std::count_if(sv.begin(), sv.end(),
                                          [&](double s) { return s > rel_tol * sv(0); }));
}

Matrix select_columns(const Matrix& a, const std::vector<Index>& cols) {
  Matrix out(a.rows(), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Index>(i)) = a.col(cols[i]);
  return out;
}

}  // namespace streamid
