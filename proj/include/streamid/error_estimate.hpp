#pragma once

#include "streamid/types.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

namespace streamid {

/// Disjoint row subsets I1, I2, I3 of the l sketch rows.
struct EstimatorSplit {
  std::vector<Index> i1, i2, i3;

  /// Sizes round(c1 l) and round(c2 l) (at least 1, and |I2| > |I1|); the rest go to I3.
  static EstimatorSplit make(Index ell, std::uint64_t seed, double c1 = 1.0 / 6.0,
                             double c2 = 1.0 / 3.0);
};

struct ErrorReport {
  double est_abs = 0.0;
  double est_rel = 0.0;
  double frob2 = 0.0;
  double cross = 0.0;      // estimate of tr(A (A_J P)^T)
  double fit_norm2 = 0.0;  // ||A_J P||_F^2 = tr(G P P^T)
  bool clamped = false;    // squared estimate was negative
  bool degenerate = false; // low-rank term dropped
};

/// (1 / samples) sum_j w_j^T B w_j with standard Gaussian w_j; `quad_form` returns w^T B w.
double hutchinson_trace(const std::function<double(const Vector&)>& quad_form, Index dim,
                        Index samples, std::uint64_t seed);

struct CrossTrace {
  double value = 0.0;
  bool degenerate = false;
};

/// NA-Hutch++ estimate of tr(A (A_J P)^T) from the rows of S = Omega A and
/// Y = Omega A_J P. `row_moment` is E[w w^T] / I for one row w of Omega.
CrossTrace estimate_cross_trace(const Matrix& s, const Matrix& y, const Matrix& p,
                                const Matrix& gram_basis, const EstimatorSplit& split,
                                double row_moment);

/// ||A_obs - A_J P||_F from frob2, the cross-trace estimate and tr(G P P^T).
ErrorReport estimate_frobenius_error(const Matrix& s, const Matrix& sketch_basis, const Matrix& p,
                                     const Matrix& gram_basis, double frob2,
                                     const EstimatorSplit& split, double row_moment);

struct Selection {
  int index = 0;  // 0..3 for algorithms 4..7
  std::array<ErrorReport, 4> reports;
};

/// Estimates every candidate with the same split and returns the smallest; ties go to the lower index.
Selection select_best_coefficients(const Matrix& s, const Matrix& sketch_basis,
                                   const std::array<const Matrix*, 4>& candidates,
                                   const Matrix& gram_basis, double frob2,
                                   const EstimatorSplit& split, double row_moment);

double exact_frobenius_error(const Matrix& a, const Matrix& basis, const Matrix& p,
                             std::uint64_t budget = kDefaultOracleBudget);

}  // namespace streamid
