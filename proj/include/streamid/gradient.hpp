#pragma once

#include "streamid/column_select.hpp"
#include "streamid/coefficients.hpp"
#include "streamid/sketching.hpp"
#include "streamid/types.hpp"

#include <Eigen/Sparse>

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

namespace streamid {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Structured lattice with axis-aligned 1-ring neighborhoods. Node index is
/// i + nx * (j + ny * k).
struct GridGraph {
  std::vector<Index> dims;          // 1 to 3 entries
  std::vector<double> spacing;      // per axis; empty means unit spacing

  int d() const { return static_cast<int>(dims.size()); }
  Index nodes() const;
  double h(int axis) const;
  void validate() const;
};

/// One sparse m x m operator per spatial dimension.
struct GradientOperator {
  std::vector<SparseMatrix> g;

  int d() const { return static_cast<int>(g.size()); }
  Index nodes() const { return g.empty() ? 0 : g.front().rows(); }
};

GradientOperator build_gradient_operator(const GridGraph& grid);

/// (G^1 a; ...; G^d a) stacked into one vector of length d * m.
Vector estimate_gradient(const GradientOperator& op, const Vector& a);
/// Column-wise gradient of every column of A, stacked the same way (d m x n).
Matrix estimate_gradient(const GradientOperator& op, const Matrix& a);

/// [a; sqrt(w) G^1 a; ...; sqrt(w) G^d a].
Vector augment_for_css(const Vector& a, const GradientOperator& op, double weight);

/// Sketch of the augmented column used for selection scores:
///   Omega a + sqrt(w) sum_p Omega_p G^p a
/// where Omega is the value projection and the Omega_p are independent draws of the same shape.
class GradientScoreSketch {
 public:
  GradientScoreSketch(const GradientOperator& op, const Projection& value, double weight,
                      std::uint64_t seed);

  ScoreSample operator()(const Vector& a, const Vector& value_sketch) const;
  Index rows() const { return rows_; }

 private:
  const GradientOperator* op_;
  std::vector<Matrix> omega_g_;  // Omega_p G^p
  double weight_;
  Index rows_;
};

/// P(lambda) = argmin ||S_J X - S||^2 + lambda sum_p ||(Omega G^p A_J) X - Omega G^p A||^2.
/// `sj` and `gaj` hold the occupied slots only; rows are scattered back by J.
CoeffResult coeff_gradient_augmented(const Matrix& sj, const Matrix& s,
                                     const std::vector<Matrix>& gaj, const std::vector<Matrix>& ga,
                                     const std::vector<std::uint64_t>& J, double lambda);

/// Sketched GCV(lambda) = ||(I - C(lambda)) S||^2 / tr(I - C(lambda))^2 with
///   C(lambda) = S_J M^{-1} (S_J + lambda sum_p (Omega G^p Omega^T)^T Omega G^p A_J)^T,
///   M = S_J^T S_J + lambda sum_p (Omega G^p A_J)^T (Omega G^p A_J).
class GcvEvaluator {
 public:
  GcvEvaluator(const Matrix& sj, const Matrix& s, const std::vector<Matrix>& gaj,
               const std::vector<Matrix>& gomega);

  double value(double lambda) const;
  /// Same quantity from explicitly formed l x l matrices.
  double value_uncached(double lambda) const;
  double denominator(double lambda) const;

 private:
  Matrix sj_, s_;
  std::vector<Matrix> gaj_, gomega_;
  Matrix sjt_sj_, h_, k_, sjt_s_, kt_s_, kt_sj_;
  double s_norm2_ = 0.0;
  Index ell_ = 0;
};

struct GoldenResult {
  double x = 0.0;
  double fx = 0.0;
  std::vector<std::array<double, 2>> trace;  // every (x, f(x)) evaluated
  bool converged = true;
};

/// Golden-section search over log10(x) on [lo, hi]; `tol` is in decades.
/// The better of the final midpoint and the two end points is returned.
GoldenResult golden_section_min(const std::function<double(double)>& f, double lo, double hi,
                                double tol = 1e-3, int max_iter = 200);

/// ||G (A - B)||_F / ||G A||_F with G stacked over all dimensions.
double gradient_field_error(const GradientOperator& op, const Matrix& a, const Matrix& b);

}  // namespace streamid
