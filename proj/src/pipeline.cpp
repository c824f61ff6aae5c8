#include "streamid/pipeline.hpp"

#include "streamid/coefficients.hpp"
#include "streamid/error_estimate.hpp"
#include "streamid/linalg.hpp"
#include "streamid/rng.hpp"

#include <algorithm>

namespace streamid {

std::string to_string(UpdatePolicy p) {
  switch (p) {
    case UpdatePolicy::Best: return "best";
    case UpdatePolicy::Alg4: return "alg4";
    case UpdatePolicy::Alg5: return "alg5";
    case UpdatePolicy::Alg6: return "alg6";
    case UpdatePolicy::Alg7: return "alg7";
  }
  return "best";
}

UpdatePolicy parse_update_policy(const std::string& s) {
  for (auto p : {UpdatePolicy::Best, UpdatePolicy::Alg4, UpdatePolicy::Alg5, UpdatePolicy::Alg6,
                 UpdatePolicy::Alg7})
    if (to_string(p) == s) return p;
  throw Error(ErrorKind::Config, "unknown update policy '" + s + "'");
}

Index CompressorConfig::sketch_rows(Index m) const {
  if (identity_projection) return m;
  return ell > 0 ? ell : std::max(k, basis_size()) + oversampling;
}

CssParams CompressorConfig::css_params() const {
  CssParams p;
  p.k = k;
  p.t = basis_size();
  p.eps = eps;
  p.delta = delta;
  p.c = c;
  return p;
}

void CompressorConfig::validate(Index m, Index n) const {
  require(k >= 1, ErrorKind::Config, "k must be at least 1");
  require(k <= n, ErrorKind::Config, "k exceeds the number of columns");
  require(k <= m, ErrorKind::Config, "k exceeds the number of rows");
  require(oversampling >= 0, ErrorKind::Config, "oversampling must be non-negative");
  css_params().validate();
  const Index l = sketch_rows(m);
  require(l >= basis_size(), ErrorKind::Config, "sketch size must be at least t");
  require(split_c1 > 0.0 && split_c2 > split_c1 && split_c1 + split_c2 < 1.0, ErrorKind::Config,
          "estimator split needs 0 < c1 < c2 and c1 + c2 < 1");
  EstimatorSplit::make(l, 0, split_c1, split_c2);
  if (gradient != GradientMode::None) {
    grid.validate();
    require(grid.nodes() == m, ErrorKind::Config, "grid node count does not match m");
    require(gradient_weight >= 0.0, ErrorKind::Config, "gradient weight must be non-negative");
    require(gcv_lo > 0.0 && gcv_lo < gcv_hi, ErrorKind::Config, "GCV interval must satisfy 0 < lo < hi");
    require(gcv_tol > 0.0 && gcv_max_iter > 0, ErrorKind::Config, "GCV tolerance must be positive");
  }
}

nlohmann::json CompressorConfig::to_json() const {
  nlohmann::json j;
  j["k"] = k;
  j["t"] = basis_size();
  j["oversampling"] = oversampling;
  j["ell"] = ell;
  j["seed"] = seed;
  j["eps"] = eps;
  j["delta"] = delta;
  j["c"] = c;
  j["scaling"] = scaling == ProjectionScaling::Scaled ? "scaled" : "unscaled";
  j["identity_projection"] = identity_projection;
  j["policy"] = to_string(policy);
  j["split"] = {split_c1, split_c2};
  j["gradient"] = to_string(gradient);
  j["grid"] = grid.dims;
  j["grid_spacing"] = grid.spacing;
  j["gradient_weight"] = gradient_weight;
  j["gcv"] = {{"lo", gcv_lo}, {"hi", gcv_hi}, {"tol", gcv_tol}, {"max_iter", gcv_max_iter}};
  return j;
}

CompressorConfig CompressorConfig::from_json(const nlohmann::json& j) {
  CompressorConfig c;
  try {
    c.k = j.at("k").get<Index>();
    c.t = j.at("t").get<Index>();
    c.oversampling = j.at("oversampling").get<Index>();
    c.ell = j.at("ell").get<Index>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.eps = j.at("eps").get<double>();
    c.delta = j.at("delta").get<double>();
    c.c = j.at("c").get<double>();
    c.scaling = j.at("scaling").get<std::string>() == "unscaled" ? ProjectionScaling::Unscaled
                                                                 : ProjectionScaling::Scaled;
    c.identity_projection = j.at("identity_projection").get<bool>();
    c.policy = parse_update_policy(j.at("policy").get<std::string>());
    c.split_c1 = j.at("split").at(0).get<double>();
    c.split_c2 = j.at("split").at(1).get<double>();
    c.gradient = parse_gradient_mode(j.at("gradient").get<std::string>());
    c.grid.dims = j.at("grid").get<std::vector<Index>>();
    c.grid.spacing = j.at("grid_spacing").get<std::vector<double>>();
    c.gradient_weight = j.at("gradient_weight").get<double>();
    const auto& g = j.at("gcv");
    c.gcv_lo = g.at("lo").get<double>();
    c.gcv_hi = g.at("hi").get<double>();
    c.gcv_tol = g.at("tol").get<double>();
    c.gcv_max_iter = g.at("max_iter").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("invalid config: ") + e.what());
  }
  return c;
}

StreamingCompressor::StreamingCompressor(const CompressorConfig& config, Index m)
    : config_(config), m_(m) {
  const Index l = config_.sketch_rows(m);
  Projection proj = config_.identity_projection
                        ? identity_projection(m)
                        : make_projection(l, m, derive_seed(config_.seed, seed_stream::kProjection),
                                          config_.scaling);
  ScoreAugmenter aug;
  Index score_rows = 0;
  if (config_.gradient != GradientMode::None) {
    op_ = std::make_shared<GradientOperator>(build_gradient_operator(config_.grid));
    if (uses_gradient_coeff(config_.gradient)) {
      for (const auto& g : op_->g) omega_g_.push_back(proj.matrix() * g);
      grad_sketch_.resize(op_->g.size());
    }
    if (uses_gradient_css(config_.gradient)) {
      auto scorer = std::make_shared<GradientScoreSketch>(
          *op_, proj, config_.gradient_weight,
          derive_seed(config_.seed, seed_stream::kScoreProjection));
      score_rows = scorer->rows();
      auto op = op_;  // keeps the operator alive alongside the scorer
      aug = [scorer, op](const Vector& a, const Vector& s) { return (*scorer)(a, s); };
    }
  }
  css_ = std::make_unique<StreamingCss>(std::move(proj), config_.css_params(), config_.seed,
                                        std::move(aug), score_rows);
  meta_.k = static_cast<std::uint64_t>(config_.k);
  meta_.ell = static_cast<std::uint64_t>(l);
  meta_.seed = config_.seed;
  meta_.gradient = config_.gradient;
  meta_.config = config_.to_json();
}

void StreamingCompressor::push(const Vector& a) {
  require(a.size() == m_, ErrorKind::Format, "column length does not match m");
  for (std::size_t p = 0; p < omega_g_.size(); ++p) grad_sketch_[p].push_back(omega_g_[p] * a);
  if (css_->push(a)) update_coefficients();
}

Matrix StreamingCompressor::sketch_of_basis(const Matrix& s) const {
  const auto& J = css_->basis().J;
  Matrix sj = Matrix::Zero(s.rows(), static_cast<Index>(J.size()));
  for (std::size_t i = 0; i < J.size(); ++i)
    if (J[i] != kVacant) sj.col(static_cast<Index>(i)) = s.col(static_cast<Index>(J[i]));
  return sj;
}

void StreamingCompressor::update_coefficients() {
  const BasisState& basis = css_->basis();
  const Matrix s = css_->sketch().sketch();
  const Matrix sj = sketch_of_basis(s);
  const Matrix gram = basis.C.transpose() * basis.C;

  CoeffContext ctx{s, sj, basis.C, basis.J, &gram, have_prev_ ? &p_ : nullptr,
                   have_prev_ ? &prev_basis_ : nullptr, j_prev_};
  std::array<CoeffResult, 4> cand{coeff_full_sketch(ctx), coeff_partial_sketch(ctx),
                                  coeff_residual(ctx), coeff_qr_transform(ctx)};

  const auto epoch = static_cast<std::uint64_t>(meta_.epochs.size());
  const EstimatorSplit split = EstimatorSplit::make(
      s.rows(), derive_seed(derive_seed(config_.seed, seed_stream::kEstimator), epoch),
      config_.split_c1, config_.split_c2);
  const Selection sel = select_best_coefficients(
      s, sj, {&cand[0].P, &cand[1].P, &cand[2].P, &cand[3].P}, gram, css_->sketch().frob2(), split,
      projection().row_second_moment());

  int chosen = sel.index;
  switch (config_.policy) {
    case UpdatePolicy::Best: break;
    case UpdatePolicy::Alg4: chosen = 0; break;
    case UpdatePolicy::Alg5: chosen = 1; break;
    case UpdatePolicy::Alg6: chosen = 2; break;
    case UpdatePolicy::Alg7: chosen = 3; break;
  }
  const auto ci = static_cast<std::size_t>(chosen);

  EpochRecord rec;
  rec.n_obs = static_cast<std::uint64_t>(s.cols());
  rec.chosen = chosen + 4;
  for (std::size_t q = 0; q < 4; ++q) {
    rec.est_rel[q] = sel.reports[q].est_rel;
    rec.degraded[q] = cand[q].degraded;
  }
  rec.evicted = static_cast<std::uint64_t>(css_->last_outcome().evicted);
  rec.admitted = static_cast<std::uint64_t>(css_->last_outcome().admitted);
  rec.clamped = sel.reports[ci].clamped;
  meta_.epochs.push_back(rec);
  meta_.est_rel_error = sel.reports[ci].est_rel;
  meta_.est_abs_error = sel.reports[ci].est_abs;

  p_ = std::move(cand[ci].P);
  j_prev_ = basis.J;
  prev_basis_ = basis.C;
  have_prev_ = true;
}

void StreamingCompressor::apply_gradient_coefficients() {
  const BasisState& basis = css_->basis();
  const auto occ = occupied(basis.J);
  if (occ.empty()) return;
  const Matrix s = css_->sketch().sketch();
  const Index n = s.cols();
  Matrix sj(s.rows(), static_cast<Index>(occ.size()));
  Matrix cj(m_, static_cast<Index>(occ.size()));
  for (std::size_t i = 0; i < occ.size(); ++i) {
    sj.col(static_cast<Index>(i)) = s.col(static_cast<Index>(basis.J[static_cast<std::size_t>(occ[i])]));
    cj.col(static_cast<Index>(i)) = basis.C.col(occ[i]);
  }
  std::vector<Matrix> gaj, ga, gomega;
  const Matrix& omega = projection().matrix();
  for (std::size_t p = 0; p < omega_g_.size(); ++p) {
    gaj.push_back(omega_g_[p] * cj);
    Matrix block(s.rows(), n);
    for (Index j = 0; j < n; ++j) block.col(j) = grad_sketch_[p][static_cast<std::size_t>(j)];
    ga.push_back(std::move(block));
    gomega.push_back(omega_g_[p] * omega.transpose());
  }
  GcvEvaluator gcv(sj, s, gaj, gomega);
  GoldenResult best = golden_section_min([&](double lam) { return gcv.value(lam); }, config_.gcv_lo,
                                         config_.gcv_hi, config_.gcv_tol, config_.gcv_max_iter);
  CoeffResult res = coeff_gradient_augmented(sj, s, gaj, ga, basis.J, best.x);
  meta_.lambda_star = best.x;
  meta_.gcv_trace = best.trace;
  if (res.degraded) meta_.degraded = true;

  const Matrix full_sj = sketch_of_basis(s);
  const Matrix gram = basis.C.transpose() * basis.C;
  const EstimatorSplit split = EstimatorSplit::make(
      s.rows(),
      derive_seed(derive_seed(config_.seed, seed_stream::kEstimator),
                  static_cast<std::uint64_t>(meta_.epochs.size())),
      config_.split_c1, config_.split_c2);
  const ErrorReport rep = estimate_frobenius_error(s, full_sj, res.P, gram, css_->sketch().frob2(),
                                                   split, projection().row_second_moment());
  meta_.est_rel_error = rep.est_rel;
  meta_.est_abs_error = rep.est_abs;
  p_ = std::move(res.P);
}

IDModel StreamingCompressor::finish() {
  if (css_->finish()) update_coefficients();
  require(have_prev_, ErrorKind::Numerical, "no columns were compressed");
  if (uses_gradient_coeff(config_.gradient)) apply_gradient_coefficients();

  const BasisState& basis = css_->basis();
  IDModel model;
  model.m = static_cast<std::uint64_t>(m_);
  model.n = static_cast<std::uint64_t>(observed());
  model.indices = basis.J;
  model.basis = basis.C;
  model.coeffs = p_;
  for (const auto& e : meta_.epochs)
    if (e.degraded[static_cast<std::size_t>(e.chosen - 4)]) meta_.degraded = true;
  model.meta = meta_;
  return model;
}

IDModel compress(ColumnSource& stream, const CompressorConfig& config) {
  config.validate(stream.rows(), stream.cols());
  StreamingCompressor comp(config, stream.rows());
  Vector a;
  while (stream.next(a)) comp.push(a);
  return comp.finish();
}

}  // namespace streamid
