#include "streamid/baselines.hpp"

#include "streamid/linalg.hpp"
#include "streamid/rng.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace streamid {

double relative_error(const Matrix& a, const Matrix& approx) {
  const double den = a.norm();
  const double num = (a - approx).norm();
  return den > 0.0 ? num / den : num;
}

LowRankFactors truncated_svd(const Matrix& a, Index k, std::uint64_t budget) {
  check_budget(a.rows(), a.cols(), budget);
  require(k >= 1 && k <= std::min(a.rows(), a.cols()), ErrorKind::Config,
          "rank must lie in [1, min(m, n)]");
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  LowRankFactors f;
  f.kind = FactorKind::Svd;
  f.left = svd.matrixU().leftCols(k) * s.head(k).asDiagonal();
  f.right = svd.matrixV().leftCols(k).transpose();
  const double total = s.squaredNorm();
  const double tail = s.tail(s.size() - k).squaredNorm();
  f.rel_error = total > 0.0 ? std::sqrt(tail / total) : 0.0;
  return f;
}

LowRankFactors cpqr_id(const Matrix& a, Index k, std::uint64_t budget) {
  check_budget(a.rows(), a.cols(), budget);
  const Index n = a.cols();
  require(k >= 1 && k <= std::min(a.rows(), n), ErrorKind::Config, "rank must lie in [1, min(m, n)]");
  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  const Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const Matrix r11 = r.leftCols(k);
  const Matrix r12 = r.rightCols(n - k);

  LowRankFactors f;
  f.kind = FactorKind::Id;
  Matrix x;
  const double dmax = r11.diagonal().cwiseAbs().maxCoeff();
  if (dmax > 0.0 && std::abs(r11(k - 1, k - 1)) > kRankTolerance * dmax) {
    x = r11.triangularView<Eigen::Upper>().solve(r12);
  } else {
    x = pseudo_inverse(r11) * r12;
    f.degraded = true;
  }
  const auto& perm = qr.colsPermutation().indices();
  f.right = Matrix::Zero(k, n);
  for (Index i = 0; i < n; ++i)
    f.right.col(perm(i)) = i < k ? Vector(Vector::Unit(k, i)) : Vector(x.col(i - k));
  for (Index i = 0; i < k; ++i) f.indices.push_back(perm(i));
  f.left = select_columns(a, f.indices);
  f.rel_error = relative_error(a, f.left * f.right);
  return f;
}

double cpqr_tail_norm(const Matrix& a, Index k) {
  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  const Index m = a.rows(), n = a.cols();
  if (k >= std::min(m, n)) return 0.0;
  const Matrix r22 = qr.matrixQR().bottomRightCorner(m - k, n - k).triangularView<Eigen::Upper>();
  return r22.norm();
}

LowRankFactors randomized_svd_single_pass(ColumnSource& stream, Index k, Index ell,
                                          std::uint64_t seed) {
  const Index m = stream.rows();
  require(k >= 1 && ell >= k, ErrorKind::Config, "sketch size must be at least the rank");
  const Index s = 2 * ell + 1;
  Rng psi_rng(derive_seed(seed, 0));
  const Matrix psi = gaussian_matrix(s, m, psi_rng);
  Rng ups_rng(derive_seed(seed, 1));

  Matrix y = Matrix::Zero(m, ell);
  std::vector<Vector> w_cols;
  Vector a;
  while (stream.next(a)) {
    const Vector u = gaussian_matrix(ell, 1, ups_rng).col(0);
    y.noalias() += a * u.transpose();
    w_cols.push_back(psi * a);
  }
  const Index n = static_cast<Index>(w_cols.size());
  Matrix w(s, n);
  for (Index j = 0; j < n; ++j) w.col(j) = w_cols[static_cast<std::size_t>(j)];

  Eigen::HouseholderQR<Matrix> qr(y);
  const Matrix q = qr.householderQ() * Matrix::Identity(m, std::min(m, ell));
  LeastSquares core = solve_least_squares(psi * q, w);
  Eigen::BDCSVD<Matrix> svd(core.x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Index r = std::min<Index>(k, svd.singularValues().size());

  LowRankFactors f;
  f.kind = FactorKind::Rsvd;
  f.left = q * svd.matrixU().leftCols(r) * svd.singularValues().head(r).asDiagonal();
  f.right = svd.matrixV().leftCols(r).transpose();
  f.degraded = core.degraded;
  f.rel_error = std::numeric_limits<double>::quiet_NaN();
  return f;
}

}  // namespace streamid
