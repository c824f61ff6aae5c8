#include "streamid/column_select.hpp"

#include "streamid/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace streamid {

void CssParams::validate() const {
  require(k >= 1, ErrorKind::Config, "k must be at least 1");
  require(t >= k, ErrorKind::Config, "t must be at least k");
  require(eps > 0.0, ErrorKind::Config, "eps must be positive");
  require(delta > 0.0 && delta < 1.0, ErrorKind::Config, "delta must lie in (0, 1)");
  require(c > 0.0, ErrorKind::Config, "sampling constant c must be positive");
}

double CssParams::admission_scale() const {
  const double kd = static_cast<double>(k);
  return c * (kd * std::log(kd) + kd * std::log(1.0 / delta) / eps) / static_cast<double>(t);
}

RidgeScorer::RidgeScorer(const Matrix& gram, double frob2, Index k) {
  require(k >= 1, ErrorKind::Config, "ridge scores need k >= 1");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  require(eig.info() == Eigen::Success, ErrorKind::Numerical, "eigendecomposition failed");
  const Vector& ev = eig.eigenvalues();  // ascending
  const Index r = ev.size();
  double top = 0.0;
  for (Index i = 0; i < std::min(k, r); ++i) top += std::max(0.0, ev(r - 1 - i));
  const double raw = (frob2 - top) / static_cast<double>(k);
  clamped_ = raw < 0.0;
  lambda_ = std::max(0.0, raw);

  const double lmax = r > 0 ? std::max(0.0, ev(r - 1)) + lambda_ : 0.0;
  const double cut = kRankTolerance * lmax;
  vecs_ = eig.eigenvectors();
  inv_.resize(r);
  for (Index i = 0; i < r; ++i) {
    const double v = ev(i) + lambda_;
    inv_(i) = (lmax > 0.0 && v > cut) ? 1.0 / v : 0.0;
  }
}

double RidgeScorer::score(const Vector& sketched) const {
  if (sketched.squaredNorm() == 0.0) return 0.0;
  const Vector proj = vecs_.transpose() * sketched;
  return std::max(0.0, proj.cwiseAbs2().dot(inv_));
}

Vector RidgeScorer::scores(const Matrix& sketched_columns) const {
  Vector out(sketched_columns.cols());
  for (Index j = 0; j < sketched_columns.cols(); ++j) out(j) = score(sketched_columns.col(j));
  return out;
}

Vector approx_ridge_scores_sketch(const Matrix& gram, const Projection& proj, const Matrix& cols,
                                  double frob2, Index k) {
  require(cols.rows() == proj.cols(), ErrorKind::Config, "column length does not match projection");
  return RidgeScorer(gram, frob2, k).scores(proj.apply(cols));
}

BasisState BasisState::empty(Index m, Index t, Index score_rows) {
  BasisState b;
  b.C = Matrix::Zero(m, t);
  b.J.assign(static_cast<std::size_t>(t), kVacant);
  b.tau_old = Vector::Ones(t);
  b.D = Matrix::Zero(m, t);
  b.JD.assign(static_cast<std::size_t>(t), kVacant);
  b.C_score = Matrix::Zero(score_rows, t);
  b.D_score = Matrix::Zero(score_rows, t);
  return b;
}

Index BasisState::occupied_count() const {
  return static_cast<Index>(std::count_if(J.begin(), J.end(), [](auto j) { return j != kVacant; }));
}

std::vector<Index> BasisState::occupied_slots() const {
  std::vector<Index> out;
  for (Index i = 0; i < t(); ++i)
    if (occupied(i)) out.push_back(i);
  return out;
}

EpochOutcome apply_ridge_epoch(BasisState& basis, const Vector& fresh_slot_scores,
                               const Vector& buffer_scores, const CssParams& params, Rng& rng) {
  const Index t = basis.t();
  const Index count = basis.count;
  require(fresh_slot_scores.size() == t, ErrorKind::Config, "slot score count mismatch");
  require(buffer_scores.size() == count, ErrorKind::Config, "buffer score count mismatch");
  const double scale = params.admission_scale();

  EpochOutcome out;
  std::vector<bool> consumed(static_cast<std::size_t>(count), false);
  for (Index i = 0; i < t; ++i) {
    if (basis.occupied(i)) {
      const double old = basis.tau_old(i);
      const double tau = std::min(old, fresh_slot_scores(i));
      const double p_evict = old > 0.0 ? std::clamp(1.0 - tau / old, 0.0, 1.0) : 0.0;
      if (uniform01(rng) < p_evict) {
        basis.C.col(i).setZero();
        basis.C_score.col(i).setZero();
        basis.J[static_cast<std::size_t>(i)] = kVacant;
        basis.tau_old(i) = 1.0;
        ++out.evicted;
      } else {
        basis.tau_old(i) = tau;
      }
    }
    if (basis.occupied(i)) continue;
    for (Index r = 0; r < count; ++r) {
      if (consumed[static_cast<std::size_t>(r)] || buffer_scores(r) <= 0.0) continue;
      const double p = std::min(1.0, buffer_scores(r) * scale);
      if (uniform01(rng) < p) {
        basis.C.col(i) = basis.D.col(r);
        basis.C_score.col(i) = basis.D_score.col(r);
        basis.J[static_cast<std::size_t>(i)] = basis.JD[static_cast<std::size_t>(r)];
        basis.tau_old(i) = std::min(1.0, buffer_scores(r));
        consumed[static_cast<std::size_t>(r)] = true;
        ++out.admitted;
        break;
      }
    }
  }
  basis.count = 0;
  std::fill(basis.JD.begin(), basis.JD.end(), kVacant);
  return out;
}

EpochOutcome ridge_css_epoch(BasisState& basis, const Matrix& gram, const Projection& proj,
                             double frob2, const CssParams& params, Rng& rng) {
  basis.C_score = proj.apply(basis.C);
  basis.D_score = proj.apply(basis.D);
  RidgeScorer scorer(gram, frob2, params.k);
  const Vector slot = scorer.scores(basis.C_score);
  const Vector buf = scorer.scores(basis.D_score.leftCols(basis.count));
  return apply_ridge_epoch(basis, slot, buf, params, rng);
}

StreamingCss::StreamingCss(Projection proj, CssParams params, std::uint64_t seed,
                           ScoreAugmenter augmenter, Index score_rows)
    : proj_(std::move(proj)),
      params_(params),
      rng_(derive_seed(seed, seed_stream::kSelection)),
      augmenter_(std::move(augmenter)),
      sketch_(proj_.rows()) {
  params_.validate();
  const Index rows = augmenter_ ? score_rows : proj_.rows();
  require(rows >= 1, ErrorKind::Config, "scoring sketch needs at least one row");
  basis_ = BasisState::empty(proj_.cols(), params_.t, rows);
  if (augmenter_) score_gram_ = Matrix::Zero(rows, rows);
}

bool StreamingCss::push(const Vector& a) {
  require(a.size() == proj_.cols(), ErrorKind::Format, "column length mismatch");
  const Vector s = proj_.apply(a);
  sketch_.update(a, s);
  const Index slot = basis_.count;
  basis_.D.col(slot) = a;
  basis_.JD[static_cast<std::size_t>(slot)] = static_cast<std::uint64_t>(sketch_.observed() - 1);
  if (augmenter_) {
    ScoreSample sample = augmenter_(a, s);
    require(sample.sketch.size() == score_gram_.rows(), ErrorKind::Config,
            "scoring sketch length mismatch");
    score_gram_.noalias() += sample.sketch * sample.sketch.transpose();
    score_frob2_ += sample.energy;
    basis_.D_score.col(slot) = sample.sketch;
  } else {
    basis_.D_score.col(slot) = s;
  }
  ++basis_.count;
  if (basis_.count < params_.t) return false;
  run_epoch();
  return true;
}

bool StreamingCss::finish() {
  if (basis_.count == 0) return false;
  run_epoch();
  return true;
}

void StreamingCss::run_epoch() {
  const Matrix& gram = augmenter_ ? score_gram_ : sketch_.gram();
  const double frob2 = augmenter_ ? score_frob2_ : sketch_.frob2();
  RidgeScorer scorer(gram, frob2, params_.k);
  const Vector slot = scorer.scores(basis_.C_score);
  const Vector buf = scorer.scores(basis_.D_score.leftCols(basis_.count));
  last_ = apply_ridge_epoch(basis_, slot, buf, params_, rng_);
  ++epochs_;
  tau_history_.push_back(basis_.tau_old);
}

std::pair<BasisState, SketchState> run_streaming_css(ColumnSource& stream, const Projection& proj,
                                                     const CssParams& params, std::uint64_t seed) {
  require(stream.rows() == proj.cols(), ErrorKind::Config, "projection width does not match stream");
  StreamingCss css(proj, params, seed);
  Vector a;
  while (stream.next(a)) css.push(a);
  css.finish();
  return {css.basis(), css.sketch()};
}

namespace {

// Scores against B B^T + lambda I where B is a frequent-directions sketch.
class FdScorer {
 public:
  FdScorer(const Matrix& b, double frob2, Index k) {
    Eigen::BDCSVD<Matrix> svd(b, Eigen::ComputeThinU);
    const Vector& s = svd.singularValues();
    double top = 0.0;
    for (Index i = 0; i < std::min(k, s.size()); ++i) top += s(i) * s(i);
    lambda_ = std::max(0.0, (frob2 - top) / static_cast<double>(k));
    const double smax = s.size() > 0 ? s(0) : 0.0;
    Index r = 0;
    while (r < s.size() && s(r) > kRankTolerance * smax) ++r;
    u_ = svd.matrixU().leftCols(r);
    inv_.resize(r);
    for (Index i = 0; i < r; ++i) inv_(i) = 1.0 / (s(i) * s(i) + lambda_);
  }

  double score(const Vector& a) const {
    const double norm2 = a.squaredNorm();
    if (norm2 == 0.0) return 0.0;
    const Vector p = u_.transpose() * a;
    const double outside = std::max(0.0, norm2 - p.squaredNorm());
    double tau = p.cwiseAbs2().dot(inv_);
    if (lambda_ > 0.0) {
      tau += outside / lambda_;
    } else if (outside > 1e-20 * norm2) {
      tau = std::numeric_limits<double>::infinity();
    }
    // Leverage is at most one; B B^T underestimates A A^T so raw scores can exceed it.
    return std::min(1.0, tau);
  }

 private:
  Matrix u_;
  Vector inv_;
  double lambda_ = 0.0;
};

}  // namespace

BasisState run_fd_streaming_css(ColumnSource& stream, const CssParams& params, std::uint64_t seed,
                                Index fd_width) {
  params.validate();
  const Index m = stream.rows();
  FDSketch fd(m, fd_width > 0 ? fd_width : 2 * params.k + 1);
  BasisState basis = BasisState::empty(m, params.t, 0);
  Rng rng(derive_seed(seed, seed_stream::kSelection));
  double frob2 = 0.0;
  Index seen = 0;

  auto epoch = [&] {
    FdScorer scorer(fd.matrix(), frob2, params.k);
    Vector slot(basis.t()), buf(basis.count);
    for (Index i = 0; i < basis.t(); ++i) slot(i) = scorer.score(basis.C.col(i));
    for (Index r = 0; r < basis.count; ++r) buf(r) = scorer.score(basis.D.col(r));
    apply_ridge_epoch(basis, slot, buf, params, rng);
  };

  Vector a;
  while (stream.next(a)) {
    fd.update(a);
    frob2 += a.squaredNorm();
    basis.D.col(basis.count) = a;
    basis.JD[static_cast<std::size_t>(basis.count)] = static_cast<std::uint64_t>(seen++);
    if (++basis.count == params.t) epoch();
  }
  if (basis.count > 0) epoch();
  return basis;
}

// ------------------------------------------------------ residual-based CSS --

ResidualCssState::ResidualCssState(Index m, std::uint64_t seed, Index cap_)
    : q(m, 0), cap(cap_), rng(derive_seed(seed, seed_stream::kSelection)) {}

std::vector<std::uint64_t> ResidualCssState::indices() const {
  std::vector<std::uint64_t> out = pre_idx;
  out.insert(out.end(), current_idx.begin(), current_idx.end());
  return out;
}

Matrix ResidualCssState::columns() const {
  Matrix out(q.rows(), selected());
  Index j = 0;
  for (const auto& c : pre) out.col(j++) = c;
  for (const auto& c : current) out.col(j++) = c;
  return out;
}

namespace {

void extend_orthonormal(Matrix& q, const Vector& a) {
  Vector r = a;
  for (int pass = 0; pass < 2; ++pass) r -= q * (q.transpose() * r);
  const double nr = r.norm();
  if (nr <= 1e-12 * std::max(a.norm(), 1e-300)) return;
  q.conservativeResize(Eigen::NoChange, q.cols() + 1);
  q.col(q.cols() - 1) = r / nr;
}

void flush(ResidualCssState& s) {
  for (std::size_t i = 0; i < s.current.size(); ++i) {
    extend_orthonormal(s.q, s.current[i]);
    s.pre.push_back(std::move(s.current[i]));
    s.pre_idx.push_back(s.current_idx[i]);
  }
  s.current.clear();
  s.current_idx.clear();
  s.sigma = 0.0;
}

}  // namespace

void residual_css_update(ResidualCssState& state, const Vector& a, std::uint64_t index, Index k,
                         double xi) {
  require(xi > 0.0, ErrorKind::Config, "xi must be positive");
  require(a.size() == state.q.rows(), ErrorKind::Format, "column length mismatch");
  Vector r = a;
  if (state.q.cols() > 0) r -= state.q * (state.q.transpose() * a);
  const double p = static_cast<double>(k) * r.squaredNorm() / xi;
  state.last_probability = p;
  if (state.cap > 0 && state.selected() >= state.cap) return;

  if (p > 0.0 && uniform01(state.rng) < std::min(p, 1.0)) {
    state.current.push_back(a);
    state.current_idx.push_back(index);
  }
  if (p < 1.0) state.sigma += p;
  if (p >= 1.0 || state.sigma >= 1.0) flush(state);
}

// ------------------------------------------------------------ dense oracles --

namespace {

Vector scores_against(const Matrix& a, const Matrix& b, Index k) {
  require(k >= 1, ErrorKind::Config, "ridge scores need k >= 1");
  require(a.rows() == b.rows(), ErrorKind::Config, "row count mismatch");
  Eigen::BDCSVD<Matrix> svd(b, Eigen::ComputeThinU);
  const Vector& s = svd.singularValues();
  double top = 0.0, all = 0.0;
  for (Index i = 0; i < s.size(); ++i) {
    all += s(i) * s(i);
    if (i < k) top += s(i) * s(i);
  }
  const double lambda = std::max(0.0, (all - top) / static_cast<double>(k));
  const double emax = (s.size() > 0 ? s(0) * s(0) : 0.0) + lambda;
  const Matrix& u = svd.matrixU();

  Vector out(a.cols());
  for (Index j = 0; j < a.cols(); ++j) {
    const Vector p = u.transpose() * a.col(j);
    double tau = 0.0, inside = 0.0;
    for (Index i = 0; i < s.size(); ++i) {
      const double e = s(i) * s(i) + lambda;
      if (e > kRankTolerance * emax) {
        tau += p(i) * p(i) / e;
        inside += p(i) * p(i);
      }
    }
    const double norm2 = a.col(j).squaredNorm();
    const double outside = std::max(0.0, norm2 - inside);
    if (lambda > kRankTolerance * emax) {
      tau += outside / lambda;
    } else if (outside > 1e-10 * norm2) {
      // Rounding leaves about 1e-16 of the norm outside; anything well above that is real.
      tau = std::numeric_limits<double>::infinity();
    }
    out(j) = tau;
  }
  return out;
}

}  // namespace

Vector exact_ridge_scores(const Matrix& a, Index k, std::uint64_t budget) {
  check_budget(a.rows(), a.cols(), budget);
  return scores_against(a, a, k);
}

Vector generalized_ridge_scores(const Matrix& a, const Matrix& b, Index k, std::uint64_t budget) {
  check_budget(a.rows(), a.cols(), budget);
  check_budget(b.rows(), b.cols(), budget);
  return scores_against(a, b, k);
}

Vector rank_k_leverage_scores(const Matrix& a, Index k, std::uint64_t budget) {
  check_budget(a.rows(), a.cols(), budget);
  require(k >= 1, ErrorKind::Config, "k must be at least 1");
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinV);
  const Index r = std::min<Index>(k, svd.matrixV().cols());
  return svd.matrixV().leftCols(r).rowwise().squaredNorm();
}

std::vector<Index> offline_leverage_css(const Matrix& a, Index k, std::uint64_t seed,
                                        std::uint64_t budget) {
  require(k <= a.cols(), ErrorKind::Config, "k exceeds column count");
  Vector w = rank_k_leverage_scores(a, k, budget);
  Rng rng(derive_seed(seed, seed_stream::kBaseline));
  std::vector<Index> out;
  std::vector<bool> taken(static_cast<std::size_t>(a.cols()), false);
  for (Index pick = 0; pick < k; ++pick) {
    double total = 0.0;
    for (Index j = 0; j < a.cols(); ++j)
      if (!taken[static_cast<std::size_t>(j)]) total += w(j);
    Index chosen = -1;
    if (total > 0.0) {
      double u = uniform01(rng) * total;
      for (Index j = 0; j < a.cols(); ++j) {
        if (taken[static_cast<std::size_t>(j)] || w(j) <= 0.0) continue;
        chosen = j;
        u -= w(j);
        if (u < 0.0) break;
      }
    }
    if (chosen < 0) {
      // Remaining weight is zero: take the first untaken column.
      for (Index j = 0; j < a.cols() && chosen < 0; ++j)
        if (!taken[static_cast<std::size_t>(j)]) chosen = j;
    }
    taken[static_cast<std::size_t>(chosen)] = true;
    out.push_back(chosen);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace streamid
