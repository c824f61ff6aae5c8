#pragma once

#include "streamid/types.hpp"

#include <cstdint>

namespace streamid {

enum class ProjectionScaling {
  Scaled,    // entries N(0, 1/l): E||Omega a||^2 = ||a||^2
  Unscaled,  // entries N(0, 1), the literal randn(l, m)
};

/// Dense l x m random projection Omega. Immutable once built.
class Projection {
 public:
  static Projection gaussian(Index ell, Index m, std::uint64_t seed, ProjectionScaling scaling);
  static Projection identity(Index m);

  Index rows() const { return omega_.rows(); }
  Index cols() const { return omega_.cols(); }
  const Matrix& matrix() const { return omega_; }
  bool is_identity() const { return identity_; }
  ProjectionScaling scaling() const { return scaling_; }

  /// E[w w^T] = moment * I for a row w of Omega drawn at random; normalizes Hutchinson sums.
  double row_second_moment() const;

  Vector apply(const Vector& a) const;
  Matrix apply(const Matrix& a) const;

 private:
  Matrix omega_;
  bool identity_ = false;
  ProjectionScaling scaling_ = ProjectionScaling::Scaled;
};

Projection make_projection(Index ell, Index m, std::uint64_t seed,
                           ProjectionScaling scaling = ProjectionScaling::Scaled);
Projection identity_projection(Index m);
Vector sketch_column(const Projection& proj, const Vector& a);

/// Accumulated sketch S = Omega A_obs with its Gram S S^T and ||A_obs||_F^2.
class SketchState {
 public:
  explicit SketchState(Index ell);

  void update(const Vector& a, const Vector& s);

  Index rows() const { return gram_.rows(); }
  Index observed() const { return n_obs_; }
  auto sketch() const { return storage_.leftCols(n_obs_); }
  const Matrix& gram() const { return gram_; }
  double frob2() const { return frob2_; }

 private:
  Matrix storage_;  // l x capacity; first n_obs columns are live
  Matrix gram_;
  double frob2_ = 0.0;
  Index n_obs_ = 0;
};

void update_sketch(SketchState& state, const Vector& a, const Vector& s);

/// Sum of the k largest eigenvalues of a symmetric PSD Gram matrix.
double topk_energy(const Matrix& gram, Index k);
double topk_energy(const SketchState& state, Index k);

/// Frequent-directions sketch B (m x width). The last column is zero between updates.
class FDSketch {
 public:
  FDSketch(Index m, Index width);

  void update(const Vector& a);

  const Matrix& matrix() const { return b_; }
  Index width() const { return b_.cols(); }

 private:
  Matrix b_;
};

void fd_update(FDSketch& fd, const Vector& a);

}  // namespace streamid
