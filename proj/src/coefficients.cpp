#include "streamid/coefficients.hpp"

#include "streamid/linalg.hpp"

namespace streamid {

std::vector<Index> occupied(const std::vector<std::uint64_t>& J) {
  std::vector<Index> out;
  for (std::size_t i = 0; i < J.size(); ++i)
    if (J[i] != kVacant) out.push_back(static_cast<Index>(i));
  return out;
}

namespace {

Matrix pick_cols(const Eigen::Ref<const Matrix>& a, const std::vector<Index>& cols) {
  Matrix out(a.rows(), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Index>(i)) = a.col(cols[i]);
  return out;
}

Matrix scatter_rows(const Matrix& x, const std::vector<Index>& rows, Index t) {
  Matrix out = Matrix::Zero(t, x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(rows[i]) = x.row(static_cast<Index>(i));
  return out;
}

void check(const CoeffContext& ctx) {
  const Index t = static_cast<Index>(ctx.J.size());
  require(ctx.sketch_basis.cols() == t && ctx.basis.cols() == t, ErrorKind::Config,
          "basis width does not match index list");
  require(ctx.sketch_basis.rows() == ctx.sketch.rows(), ErrorKind::Config,
          "sketched basis row count mismatch");
}

CoeffResult sketched_solve(const CoeffContext& ctx, const std::vector<Index>& occ,
                           const Eigen::Ref<const Matrix>& rhs) {
  const Index t = static_cast<Index>(ctx.J.size());
  LeastSquares ls = solve_least_squares(pick_cols(ctx.sketch_basis, occ), rhs);
  return {scatter_rows(ls.x, occ, t), ls.degraded};
}

}  // namespace

CoeffResult coeff_full_sketch(const CoeffContext& ctx) {
  check(ctx);
  return sketched_solve(ctx, occupied(ctx.J), ctx.sketch);
}

CoeffResult coeff_partial_sketch(const CoeffContext& ctx) {
  check(ctx);
  const auto occ = occupied(ctx.J);
  const Index t = static_cast<Index>(ctx.J.size());
  Matrix g(static_cast<Index>(occ.size()), static_cast<Index>(occ.size()));
  if (ctx.gram_basis) {
    for (std::size_t a = 0; a < occ.size(); ++a)
      for (std::size_t b = 0; b < occ.size(); ++b)
        g(static_cast<Index>(a), static_cast<Index>(b)) = (*ctx.gram_basis)(occ[a], occ[b]);
  } else {
    const Matrix aj = pick_cols(ctx.basis, occ);
    g = aj.transpose() * aj;
  }
  const Matrix y = pick_cols(ctx.sketch_basis, occ).transpose() * ctx.sketch;
  LeastSquares ls = solve_least_squares(g, y);
  return {scatter_rows(ls.x, occ, t), ls.degraded};
}

CoeffResult coeff_residual(const CoeffContext& ctx) {
  check(ctx);
  if (!ctx.p_prev) return coeff_full_sketch(ctx);
  const Index t = static_cast<Index>(ctx.J.size());
  const Index n = ctx.sketch.cols();
  const Matrix& prev = *ctx.p_prev;
  require(prev.rows() == t && prev.cols() <= n, ErrorKind::Config, "P_prev shape mismatch");
  require(ctx.J_prev.size() == ctx.J.size(), ErrorKind::Config, "J_prev length mismatch");

  Matrix p = Matrix::Zero(t, n);
  p.leftCols(prev.cols()) = prev;
  for (Index i = 0; i < t; ++i) {
    const auto s = static_cast<std::size_t>(i);
    if (ctx.J[s] == kVacant || ctx.J[s] != ctx.J_prev[s]) p.row(i).setZero();
  }
  const Matrix r = ctx.sketch - ctx.sketch_basis * p;
  CoeffResult delta = sketched_solve(ctx, occupied(ctx.J), r);
  return {p + delta.P, delta.degraded};
}

CoeffResult coeff_qr_transform(const CoeffContext& ctx) {
  check(ctx);
  if (!ctx.p_prev || !ctx.prev_basis) return coeff_full_sketch(ctx);
  const Index t = static_cast<Index>(ctx.J.size());
  const Index n = ctx.sketch.cols();
  const Matrix& prev = *ctx.p_prev;
  require(prev.rows() == t && prev.cols() <= n, ErrorKind::Config, "P_prev shape mismatch");
  require(ctx.J_prev.size() == ctx.J.size(), ErrorKind::Config, "J_prev length mismatch");

  const auto occ = occupied(ctx.J);
  const auto occ_prev = occupied(ctx.J_prev);
  // T = R^+ Q^T A_{J_prev} is the least-squares map from the new basis onto the old one.
  LeastSquares tr = solve_least_squares(pick_cols(ctx.basis, occ), pick_cols(*ctx.prev_basis, occ_prev));
  Matrix prev_rows(static_cast<Index>(occ_prev.size()), prev.cols());
  for (std::size_t i = 0; i < occ_prev.size(); ++i) prev_rows.row(static_cast<Index>(i)) = prev.row(occ_prev[i]);

  Matrix p(t, n);
  p.leftCols(prev.cols()) = scatter_rows(tr.x * prev_rows, occ, t);
  bool degraded = tr.degraded;
  const Index fresh = n - prev.cols();
  if (fresh > 0) {
    CoeffResult tail = sketched_solve(ctx, occ, ctx.sketch.rightCols(fresh));
    p.rightCols(fresh) = tail.P;
    degraded = degraded || tail.degraded;
  }
  return {p, degraded};
}

CoeffResult exact_least_squares(const Matrix& basis, const Matrix& a, std::uint64_t budget) {
  check_budget(a.rows(), a.cols(), budget);
  LeastSquares ls = solve_least_squares(basis, a);
  return {ls.x, ls.degraded};
}

}  // namespace streamid
