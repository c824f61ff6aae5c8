#pragma once

#include "streamid/stream_io.hpp"
#include "streamid/types.hpp"

#include <cstdint>
#include <vector>

namespace streamid {

enum class FactorKind { Svd, Id, Rsvd };

/// A ~ left * right. For ID factors `left` holds verbatim columns `indices` of A.
struct LowRankFactors {
  FactorKind kind = FactorKind::Svd;
  Matrix left;
  Matrix right;
  std::vector<Index> indices;
  double rel_error = 0.0;  // against the dense input when it was available, else NaN
  bool degraded = false;
};

double relative_error(const Matrix& a, const Matrix& approx);

LowRankFactors truncated_svd(const Matrix& a, Index k, std::uint64_t budget = kDefaultOracleBudget);

/// Column ID from the first k pivots of a column-pivoted QR: P = [I, R11^{-1} R12] Z^T.
LowRankFactors cpqr_id(const Matrix& a, Index k, std::uint64_t budget = kDefaultOracleBudget);

/// Frobenius norm of the trailing block R22 of the same pivoted QR.
double cpqr_tail_norm(const Matrix& a, Index k);

/// Two-sketch single-pass randomized SVD: Y = A Upsilon^T (l columns) and W = Psi A
/// (2l + 1 rows) are accumulated column by column; A ~ Q (Psi Q)^+ W, truncated to rank k.
LowRankFactors randomized_svd_single_pass(ColumnSource& stream, Index k, Index ell,
                                          std::uint64_t seed);

}  // namespace streamid
