#include "streamid/error_estimate.hpp"

#include "streamid/linalg.hpp"
#include "streamid/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace streamid {

EstimatorSplit EstimatorSplit::make(Index ell, std::uint64_t seed, double c1, double c2) {
  require(c1 > 0.0 && c2 > c1 && c1 + c2 < 1.0, ErrorKind::Config,
          "estimator split needs 0 < c1 < c2 and c1 + c2 < 1");
  const Index n1 = std::max<Index>(1, std::llround(c1 * static_cast<double>(ell)));
  const Index n2 = std::max<Index>(n1 + 1, std::llround(c2 * static_cast<double>(ell)));
  require(n1 + n2 < ell, ErrorKind::Config, "sketch too small for the estimator split");

  std::vector<Index> rows(static_cast<std::size_t>(ell));
  std::iota(rows.begin(), rows.end(), Index{0});
  Rng rng(seed);
  for (Index i = ell - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(j)]);
  }
  EstimatorSplit s;
  s.i1.assign(rows.begin(), rows.begin() + n1);
  s.i2.assign(rows.begin() + n1, rows.begin() + n1 + n2);
  s.i3.assign(rows.begin() + n1 + n2, rows.end());
  return s;
}

double hutchinson_trace(const std::function<double(const Vector&)>& quad_form, Index dim,
                        Index samples, std::uint64_t seed) {
  require(samples >= 1, ErrorKind::Config, "Hutchinson needs at least one sample");
  Rng rng(seed);
  double sum = 0.0;
  for (Index j = 0; j < samples; ++j) sum += quad_form(gaussian_matrix(dim, 1, rng).col(0));
  return sum / static_cast<double>(samples);
}

namespace {

Matrix rows_of(const Matrix& a, const std::vector<Index>& idx) {
  Matrix out(static_cast<Index>(idx.size()), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = a.row(idx[i]);
  return out;
}

}  // namespace

CrossTrace estimate_cross_trace(const Matrix& s, const Matrix& y, const Matrix& p,
                                const Matrix& gram_basis, const EstimatorSplit& split,
                                double row_moment) {
  require(s.rows() == y.rows() && s.cols() == y.cols(), ErrorKind::Config, "sketch shape mismatch");
  require(p.cols() == s.cols(), ErrorKind::Config, "coefficient width mismatch");
  const Matrix s1 = rows_of(s, split.i1), s2 = rows_of(s, split.i2), s3 = rows_of(s, split.i3);
  const Matrix y2 = rows_of(y, split.i2), y3 = rows_of(y, split.i3);

  CrossTrace out;
  const Matrix core = s1 * y2.transpose();  // Omega1 B Omega2^T
  Index rank = 0;
  const Matrix core_pinv = pseudo_inverse(core, kRankTolerance, &rank);
  out.degenerate = rank == 0;

  const Matrix s1p = s1 * p.transpose();  // Omega1 A P^T
  const Matrix s2p = s2 * p.transpose();
  const double low = (core_pinv * (s1p * gram_basis * s2p.transpose())).trace();

  const double direct = (s3.cwiseProduct(y3)).sum();  // tr(Omega3 A (Omega3 A_J P)^T)
  const Matrix left = y3 * s2.transpose();            // Omega3 A_J P (Omega2 A)^T
  const Matrix right = s1 * y3.transpose();           // Omega1 A (Omega3 A_J P)^T
  const double correction = (left * core_pinv * right).trace();

  const double norm = static_cast<double>(split.i3.size()) * row_moment;
  out.value = out.degenerate ? direct / norm : low + (direct - correction) / norm;
  return out;
}

ErrorReport estimate_frobenius_error(const Matrix& s, const Matrix& sketch_basis, const Matrix& p,
                                     const Matrix& gram_basis, double frob2,
                                     const EstimatorSplit& split, double row_moment) {
  ErrorReport r;
  r.frob2 = frob2;
  r.fit_norm2 = (gram_basis * p * p.transpose()).trace();
  const Matrix y = sketch_basis * p;
  const CrossTrace c = estimate_cross_trace(s, y, p, gram_basis, split, row_moment);
  r.cross = c.value;
  r.degenerate = c.degenerate;
  double sq = frob2 - 2.0 * r.cross + r.fit_norm2;
  if (!(sq >= 0.0)) {
    sq = 0.0;
    r.clamped = true;
  }
  r.est_abs = std::sqrt(sq);
  r.est_rel = frob2 > 0.0 ? r.est_abs / std::sqrt(frob2) : 0.0;
  return r;
}

Selection select_best_coefficients(const Matrix& s, const Matrix& sketch_basis,
                                   const std::array<const Matrix*, 4>& candidates,
                                   const Matrix& gram_basis, double frob2,
                                   const EstimatorSplit& split, double row_moment) {
  Selection out;
  for (int q = 0; q < 4; ++q) {
    out.reports[static_cast<std::size_t>(q)] = estimate_frobenius_error(
        s, sketch_basis, *candidates[static_cast<std::size_t>(q)], gram_basis, frob2, split, row_moment);
    if (out.reports[static_cast<std::size_t>(q)].est_abs <
        out.reports[static_cast<std::size_t>(out.index)].est_abs)
      out.index = q;
  }
  return out;
}

double exact_frobenius_error(const Matrix& a, const Matrix& basis, const Matrix& p,
                             std::uint64_t budget) {
  check_budget(a.rows(), a.cols(), budget);
  return (a - basis * p).norm();
}

}  // namespace streamid
