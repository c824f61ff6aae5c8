#include "streamid/sketching.hpp"

#include "streamid/rng.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace streamid {

Projection Projection::gaussian(Index ell, Index m, std::uint64_t seed, ProjectionScaling scaling) {
  require(ell >= 1, ErrorKind::Config, "projection: l must be positive");
  require(m >= 1, ErrorKind::Config, "projection: m must be positive");
  Projection p;
  Rng rng(seed);
  p.omega_ = gaussian_matrix(ell, m, rng);
  if (scaling == ProjectionScaling::Scaled) p.omega_ /= std::sqrt(static_cast<double>(ell));
  p.scaling_ = scaling;
  return p;
}

Projection Projection::identity(Index m) {
  require(m >= 1, ErrorKind::Config, "projection: m must be positive");
  Projection p;
  p.omega_ = Matrix::Identity(m, m);
  p.identity_ = true;
  return p;
}

double Projection::row_second_moment() const {
  // A uniformly chosen identity row e_i has E[e_i e_i^T] = I / m.
  if (identity_ || scaling_ == ProjectionScaling::Scaled) return 1.0 / static_cast<double>(rows());
  return 1.0;
}

Vector Projection::apply(const Vector& a) const {
  require(a.size() == cols(), ErrorKind::Config, "sketch: column length does not match m");
  if (identity_) return a;
  return omega_ * a;
}

Matrix Projection::apply(const Matrix& a) const {
  require(a.rows() == cols(), ErrorKind::Config, "sketch: row count does not match m");
  if (identity_) return a;
  return omega_ * a;
}

Projection make_projection(Index ell, Index m, std::uint64_t seed, ProjectionScaling scaling) {
  return Projection::gaussian(ell, m, seed, scaling);
}

Projection identity_projection(Index m) { return Projection::identity(m); }

Vector sketch_column(const Projection& proj, const Vector& a) { return proj.apply(a); }

SketchState::SketchState(Index ell)
    : storage_(ell, 16), gram_(Matrix::Zero(ell, ell)) {
  require(ell >= 1, ErrorKind::Config, "sketch: l must be positive");
}

void SketchState::update(const Vector& a, const Vector& s) {
  require(s.size() == rows(), ErrorKind::Config, "sketch: sketched column has wrong length");
  if (n_obs_ == storage_.cols()) storage_.conservativeResize(Eigen::NoChange, 2 * storage_.cols());
  storage_.col(n_obs_++) = s;
  gram_.noalias() += s * s.transpose();
  frob2_ += a.squaredNorm();
}

void update_sketch(SketchState& state, const Vector& a, const Vector& s) { state.update(a, s); }

double topk_energy(const Matrix& gram, Index k) {
  require(k >= 0 && k <= gram.rows(), ErrorKind::Config, "topk_energy: k exceeds sketch rows");
  if (k == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const Vector& ev = eig.eigenvalues();  // ascending
  return ev.tail(k).sum();
}

double topk_energy(const SketchState& state, Index k) { return topk_energy(state.gram(), k); }

FDSketch::FDSketch(Index m, Index width) : b_(Matrix::Zero(m, width)) {
  require(m >= 1 && width >= 1, ErrorKind::Config, "frequent directions: empty sketch");
}

void FDSketch::update(const Vector& a) {
  require(a.size() == b_.rows(), ErrorKind::Config, "frequent directions: column length mismatch");
  const Index w = b_.cols();
  b_.col(w - 1) = a;
  Eigen::BDCSVD<Matrix> svd(b_, Eigen::ComputeThinU);
  const Vector& sv = svd.singularValues();
  // Singular values beyond min(m, w) are zero, so the shrink is by zero in that case.
  const double shrink = sv.size() == w ? sv(w - 1) * sv(w - 1) : 0.0;
  Matrix next = Matrix::Zero(b_.rows(), w);
  for (Index i = 0; i < sv.size(); ++i) {
    const double v = sv(i) * sv(i) - shrink;
    if (v > 0.0) next.col(i) = svd.matrixU().col(i) * std::sqrt(v);
  }
  next.col(w - 1).setZero();
  b_ = std::move(next);
}

void fd_update(FDSketch& fd, const Vector& a) { fd.update(a); }

}  // namespace streamid
