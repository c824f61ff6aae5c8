#pragma once

#include "streamid/types.hpp"

#include <vector>

namespace streamid {

/// Relative cutoff below which singular values / eigenvalues / pivots count as zero.
inline constexpr double kRankTolerance = 1e-12;

struct LeastSquares {
  Matrix x;
  Index rank = 0;
  bool degraded = false;  // true when the system was rank deficient at tolerance
};

/// Minimum-norm solution of min ||A X - B||_F via complete orthogonal decomposition.
LeastSquares solve_least_squares(const Matrix& a, const Matrix& b,
                                 double rel_tol = kRankTolerance);

/// Moore-Penrose pseudoinverse via SVD with a relative singular-value cutoff.
Matrix pseudo_inverse(const Matrix& a, double rel_tol = kRankTolerance, Index* rank = nullptr);

/// Pseudoinverse of a symmetric matrix via eigendecomposition.
Matrix symmetric_pseudo_inverse(const Matrix& s, double rel_tol = kRankTolerance,
                                Index* rank = nullptr);

/// Numerical rank: singular values above tol * sigma_max.
Index numerical_rank(const Matrix& a, double rel_tol);

/// Columns of `a` picked by `cols`, in order.
Matrix select_columns(const Matrix& a, const std::vector<Index>& cols);

}  // namespace streamid
