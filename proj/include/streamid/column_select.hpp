#pragma once

#include "streamid/rng.hpp"
#include "streamid/sketching.hpp"
#include "streamid/stream_io.hpp"
#include "streamid/types.hpp"

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace streamid {

struct CssParams {
  Index k = 0;          // target rank
  Index t = 0;          // basis size (and buffer length)
  double eps = 0.5;     // accuracy
  double delta = 0.05;  // failure probability
  double c = 1.0;       // sampling constant

  void validate() const;
  /// Multiplier on a buffered column's score giving its admission probability:
  /// c * (k log k + k log(1/delta) / eps) / t.
  double admission_scale() const;
};

/// Ridge leverage scores against a sketched Gram matrix:
///   tau(s) = s^T (G + lambda I)^+ s,  lambda = max(0, (frob2 - topk(G)) / k).
/// The eigendecomposition is computed once and reused for every scored column.
class RidgeScorer {
 public:
  RidgeScorer(const Matrix& gram, double frob2, Index k);

  double lambda() const { return lambda_; }
  /// True when frob2 - topk(G) was negative and lambda was clamped to zero.
  bool lambda_clamped() const { return clamped_; }

  double score(const Vector& sketched) const;
  Vector scores(const Matrix& sketched_columns) const;

 private:
  Matrix vecs_;
  Vector inv_;
  double lambda_ = 0.0;
  bool clamped_ = false;
};

Vector approx_ridge_scores_sketch(const Matrix& gram, const Projection& proj, const Matrix& cols,
                                  double frob2, Index k);

/// Fixed-size basis C with its retained scores plus the buffer D of new columns.
/// Vacant slots hold a zero column and index kVacant.
struct BasisState {
  Matrix C;                          // m x t
  std::vector<std::uint64_t> J;      // stream index per slot
  Vector tau_old;                    // retained ridge score per slot; 1 when vacant
  Matrix D;                          // m x t buffer
  std::vector<std::uint64_t> JD;     // stream index per buffered column
  Index count = 0;                   // buffered columns
  Matrix C_score;                    // scoring sketch of each slot
  Matrix D_score;                    // scoring sketch of each buffered column

  static BasisState empty(Index m, Index t, Index score_rows);

  Index t() const { return static_cast<Index>(J.size()); }
  bool occupied(Index i) const { return J[static_cast<std::size_t>(i)] != kVacant; }
  Index occupied_count() const;
  std::vector<Index> occupied_slots() const;
};

struct EpochOutcome {
  Index evicted = 0;
  Index admitted = 0;
};

/// One basis update given fresh scores for the slots and the buffer.
/// Draw order: slots in order; per slot one eviction draw if occupied, then one
/// admission draw per not-yet-admitted buffered column until a success.
/// A buffered column fills at most one slot. Clears the buffer.
EpochOutcome apply_ridge_epoch(BasisState& basis, const Vector& fresh_slot_scores,
                               const Vector& buffer_scores, const CssParams& params, Rng& rng);

/// Scores slots and buffer against (gram, frob2) through `proj`, then applies the update.
EpochOutcome ridge_css_epoch(BasisState& basis, const Matrix& gram, const Projection& proj,
                             double frob2, const CssParams& params, Rng& rng);

/// Scoring sketch of a column and its contribution to the scoring energy.
struct ScoreSample {
  Vector sketch;
  double energy = 0.0;
};
using ScoreAugmenter = std::function<ScoreSample(const Vector& column, const Vector& value_sketch)>;

/// Single-pass ridge-leverage column selection on top of a random-projection sketch.
/// With an augmenter, selection scores use a separate sketch of augmented columns
/// while the value sketch S is kept for coefficient computation.
class StreamingCss {
 public:
  StreamingCss(Projection proj, CssParams params, std::uint64_t seed, ScoreAugmenter augmenter = {},
               Index score_rows = 0);

  /// Consumes one column; returns true if it completed the buffer and an epoch ran.
  bool push(const Vector& a);
  /// Runs a final epoch on a non-empty partial buffer; returns true if one ran.
  bool finish();

  const Projection& projection() const { return proj_; }
  const SketchState& sketch() const { return sketch_; }
  const BasisState& basis() const { return basis_; }
  const CssParams& params() const { return params_; }
  const EpochOutcome& last_outcome() const { return last_; }
  Index epochs() const { return epochs_; }
  /// tau_old after every epoch, one column per epoch.
  const std::vector<Vector>& tau_history() const { return tau_history_; }

 private:
  void run_epoch();

  Projection proj_;
  CssParams params_;
  Rng rng_;
  ScoreAugmenter augmenter_;
  SketchState sketch_;
  BasisState basis_;
  Matrix score_gram_;
  double score_frob2_ = 0.0;
  EpochOutcome last_;
  Index epochs_ = 0;
  std::vector<Vector> tau_history_;
};

std::pair<BasisState, SketchState> run_streaming_css(ColumnSource& stream, const Projection& proj,
                                                     const CssParams& params, std::uint64_t seed);

/// Frequent-directions variant: scores against B B^T of an FD sketch instead of a
/// random projection. Used only as a baseline.
BasisState run_fd_streaming_css(ColumnSource& stream, const CssParams& params, std::uint64_t seed,
                                Index fd_width = 0);

// ------------------------------------------------------ residual-based CSS --

struct ResidualCssState {
  std::vector<Vector> pre;
  std::vector<std::uint64_t> pre_idx;
  std::vector<Vector> current;
  std::vector<std::uint64_t> current_idx;
  Matrix q;             // orthonormal basis of span(pre), m x rank
  double sigma = 0.0;   // residual mass since the last flush
  double last_probability = 0.0;
  Index cap = 0;        // stop admitting once this many columns are selected; 0 = no cap
  Rng rng;

  ResidualCssState(Index m, std::uint64_t seed, Index cap = 0);

  Index selected() const { return static_cast<Index>(pre.size() + current.size()); }
  std::vector<std::uint64_t> indices() const;
  Matrix columns() const;
};

void residual_css_update(ResidualCssState& state, const Vector& a, std::uint64_t index, Index k,
                         double xi);

// ------------------------------------------------------------ dense oracles --

/// tau_j = a_j^T (A A^T + lambda I)^+ a_j with lambda = ||A - A_k||_F^2 / k.
Vector exact_ridge_scores(const Matrix& a, Index k, std::uint64_t budget = kDefaultOracleBudget);

/// Scores of the columns of A against B: a_i^T (B B^T + ||B - B_k||_F^2 / k I)^+ a_i,
/// +infinity for columns outside the range when that matrix is singular.
Vector generalized_ridge_scores(const Matrix& a, const Matrix& b, Index k,
                                std::uint64_t budget = kDefaultOracleBudget);

/// Rank-k leverage scores: squared row norms of the top-k right singular vectors.
Vector rank_k_leverage_scores(const Matrix& a, Index k, std::uint64_t budget = kDefaultOracleBudget);

/// k columns sampled without replacement proportionally to rank-k leverage scores.
std::vector<Index> offline_leverage_css(const Matrix& a, Index k, std::uint64_t seed,
                                        std::uint64_t budget = kDefaultOracleBudget);

}  // namespace streamid
