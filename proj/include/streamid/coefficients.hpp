#pragma once

#include "streamid/types.hpp"

#include <cstdint>
#include <vector>

namespace streamid {

/// Everything the streaming coefficient updaters may read. Vacant slots (index
/// kVacant) carry zero columns and always receive zero coefficient rows.
struct CoeffContext {
  Eigen::Ref<const Matrix> sketch;        // S = Omega A_obs, l x n_obs
  Eigen::Ref<const Matrix> sketch_basis;  // S_J, l x t
  Eigen::Ref<const Matrix> basis;         // A_J, m x t
  std::vector<std::uint64_t> J;
  const Matrix* gram_basis = nullptr;     // A_J^T A_J; computed on demand when null
  const Matrix* p_prev = nullptr;         // t x n_prev, n_prev <= n_obs
  const Matrix* prev_basis = nullptr;     // A_{J_prev}, m x t
  std::vector<std::uint64_t> J_prev;
};

struct CoeffResult {
  Matrix P;
  bool degraded = false;
};

/// Slots of J that hold a column.
std::vector<Index> occupied(const std::vector<std::uint64_t>& J);

/// P = S_J^+ S.
CoeffResult coeff_full_sketch(const CoeffContext& ctx);
/// P = (A_J^T A_J)^{-1} S_J^T S.
CoeffResult coeff_partial_sketch(const CoeffContext& ctx);
/// P = P_prev (replaced rows zeroed, zero-padded to n_obs) + S_J^+ (S - S_J P_prev).
CoeffResult coeff_residual(const CoeffContext& ctx);
/// Maps P_prev through T = R^+ Q^T A_{J_prev}; columns seen since use S_J^+ S.
CoeffResult coeff_qr_transform(const CoeffContext& ctx);

/// Dense P = A_J^+ A.
CoeffResult exact_least_squares(const Matrix& basis, const Matrix& a,
                                std::uint64_t budget = kDefaultOracleBudget);

}  // namespace streamid
