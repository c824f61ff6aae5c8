#include "streamid/gradient.hpp"

#include "streamid/linalg.hpp"
#include "streamid/rng.hpp"

#include <algorithm>
#include <cmath>

namespace streamid {

Index GridGraph::nodes() const {
  Index n = 1;
  for (Index v : dims) n *= v;
  return n;
}

double GridGraph::h(int axis) const {
  return spacing.empty() ? 1.0 : spacing[static_cast<std::size_t>(axis)];
}

void GridGraph::validate() const {
  require(!dims.empty() && dims.size() <= 3, ErrorKind::Config, "grid must have 1 to 3 dimensions");
  for (Index v : dims) require(v >= 2, ErrorKind::Config, "every grid dimension must be at least 2");
  require(spacing.empty() || spacing.size() == dims.size(), ErrorKind::Config,
          "grid spacing must give one value per dimension");
  for (double h : spacing) require(h > 0.0, ErrorKind::Config, "grid spacing must be positive");
}

GradientOperator build_gradient_operator(const GridGraph& grid) {
  grid.validate();
  const int d = grid.d();
  const Index m = grid.nodes();
  std::array<Index, 3> stride{1, 1, 1};
  for (int a = 1; a < d; ++a) stride[static_cast<std::size_t>(a)] = stride[static_cast<std::size_t>(a - 1)] * grid.dims[static_cast<std::size_t>(a - 1)];

  std::vector<std::vector<Eigen::Triplet<double>>> trip(static_cast<std::size_t>(d));
  for (Index q = 0; q < m; ++q) {
    std::array<Index, 3> coord{0, 0, 0};
    for (int a = 0; a < d; ++a)
      coord[static_cast<std::size_t>(a)] = (q / stride[static_cast<std::size_t>(a)]) % grid.dims[static_cast<std::size_t>(a)];

    std::vector<Index> nbr;
    std::vector<Vector> offs;
    for (int a = 0; a < d; ++a) {
      const auto sa = static_cast<std::size_t>(a);
      for (int dir : {-1, 1}) {
        const Index c = coord[sa] + dir;
        if (c < 0 || c >= grid.dims[sa]) continue;
        nbr.push_back(q + dir * stride[sa]);
        Vector off = Vector::Zero(d);
        off(a) = dir * grid.h(a);
        offs.push_back(off);
      }
    }
    Matrix k(static_cast<Index>(nbr.size()), d);
    for (std::size_t r = 0; r < offs.size(); ++r) k.row(static_cast<Index>(r)) = offs[r].transpose();
    Index rank = 0;
    const Matrix kp = pseudo_inverse(k, kRankTolerance, &rank);
    require(rank == d, ErrorKind::Numerical, "neighborhood does not span every dimension");
    for (int p = 0; p < d; ++p) {
      auto& tp = trip[static_cast<std::size_t>(p)];
      double sum = 0.0;
      for (std::size_t r = 0; r < nbr.size(); ++r) {
        const double w = kp(p, static_cast<Index>(r));
        if (w != 0.0) tp.emplace_back(q, nbr[r], w);
        sum += w;
      }
      tp.emplace_back(q, q, -sum);
    }
  }
  GradientOperator op;
  for (int p = 0; p < d; ++p) {
    SparseMatrix g(m, m);
    g.setFromTriplets(trip[static_cast<std::size_t>(p)].begin(), trip[static_cast<std::size_t>(p)].end());
    g.makeCompressed();
    op.g.push_back(std::move(g));
  }
  return op;
}

Vector estimate_gradient(const GradientOperator& op, const Vector& a) {
  const Index m = op.nodes();
  require(a.size() == m, ErrorKind::Config, "field length does not match the grid");
  Vector out(m * op.d());
  for (int p = 0; p < op.d(); ++p) out.segment(p * m, m) = op.g[static_cast<std::size_t>(p)] * a;
  return out;
}

Matrix estimate_gradient(const GradientOperator& op, const Matrix& a) {
  const Index m = op.nodes();
  require(a.rows() == m, ErrorKind::Config, "field length does not match the grid");
  Matrix out(m * op.d(), a.cols());
  for (int p = 0; p < op.d(); ++p) out.middleRows(p * m, m) = op.g[static_cast<std::size_t>(p)] * a;
  return out;
}

Vector augment_for_css(const Vector& a, const GradientOperator& op, double weight) {
  Vector out(a.size() * (1 + op.d()));
  out.head(a.size()) = a;
  out.tail(a.size() * op.d()) = std::sqrt(weight) * estimate_gradient(op, a);
  return out;
}

GradientScoreSketch::GradientScoreSketch(const GradientOperator& op, const Projection& value,
                                         double weight, std::uint64_t seed)
    : op_(&op), weight_(weight), rows_(value.rows()) {
  require(weight >= 0.0, ErrorKind::Config, "gradient weight must be non-negative");
  require(value.cols() == op.nodes(), ErrorKind::Config, "projection width does not match the grid");
  for (int p = 0; p < op.d(); ++p) {
    Matrix omega;
    if (value.is_identity()) {
      omega = Matrix::Identity(value.rows(), value.cols());
    } else {
      omega = Projection::gaussian(value.rows(), value.cols(),
                                   derive_seed(seed, static_cast<std::uint64_t>(p)), value.scaling())
                  .matrix();
    }
    omega_g_.push_back(omega * op.g[static_cast<std::size_t>(p)]);
  }
}

ScoreSample GradientScoreSketch::operator()(const Vector& a, const Vector& value_sketch) const {
  ScoreSample out{value_sketch, a.squaredNorm()};
  const double sw = std::sqrt(weight_);
  for (int p = 0; p < op_->d(); ++p) {
    out.sketch.noalias() += sw * (omega_g_[static_cast<std::size_t>(p)] * a);
    out.energy += weight_ * (op_->g[static_cast<std::size_t>(p)] * a).squaredNorm();
  }
  return out;
}

CoeffResult coeff_gradient_augmented(const Matrix& sj, const Matrix& s,
                                     const std::vector<Matrix>& gaj, const std::vector<Matrix>& ga,
                                     const std::vector<std::uint64_t>& J, double lambda) {
  require(lambda >= 0.0, ErrorKind::Config, "lambda must be non-negative");
  require(gaj.size() == ga.size(), ErrorKind::Config, "gradient block count mismatch");
  const Index l = sj.rows();
  const Index blocks = 1 + static_cast<Index>(gaj.size());
  Matrix lhs(l * blocks, sj.cols());
  Matrix rhs(l * blocks, s.cols());
  lhs.topRows(l) = sj;
  rhs.topRows(l) = s;
  const double w = std::sqrt(lambda);
  for (std::size_t p = 0; p < gaj.size(); ++p) {
    const Index off = l * static_cast<Index>(p + 1);
    lhs.middleRows(off, l) = w * gaj[p];
    rhs.middleRows(off, l) = w * ga[p];
  }
  LeastSquares ls = solve_least_squares(lhs, rhs);
  const auto occ = occupied(J);
  require(static_cast<Index>(occ.size()) == sj.cols(), ErrorKind::Config,
          "occupied slot count does not match the basis sketch");
  Matrix p = Matrix::Zero(static_cast<Index>(J.size()), s.cols());
  for (std::size_t i = 0; i < occ.size(); ++i) p.row(occ[i]) = ls.x.row(static_cast<Index>(i));
  return {p, ls.degraded};
}

GcvEvaluator::GcvEvaluator(const Matrix& sj, const Matrix& s, const std::vector<Matrix>& gaj,
                           const std::vector<Matrix>& gomega)
    : sj_(sj), s_(s), gaj_(gaj), gomega_(gomega), ell_(sj.rows()) {
  require(gaj.size() == gomega.size(), ErrorKind::Config, "gradient block count mismatch");
  const Index t = sj.cols();
  sjt_sj_ = sj.transpose() * sj;
  h_ = Matrix::Zero(t, t);
  k_ = Matrix::Zero(ell_, t);
  for (std::size_t p = 0; p < gaj.size(); ++p) {
    h_.noalias() += gaj[p].transpose() * gaj[p];
    k_.noalias() += gomega[p].transpose() * gaj[p];
  }
  sjt_s_ = sj.transpose() * s;
  kt_s_ = k_.transpose() * s;
  kt_sj_ = k_.transpose() * sj;
  s_norm2_ = s.squaredNorm();
}

double GcvEvaluator::denominator(double lambda) const {
  const Matrix m = sjt_sj_ + lambda * h_;
  const Matrix inner = solve_least_squares(m, sjt_sj_ + lambda * kt_sj_).x;
  return static_cast<double>(ell_) - inner.trace();
}

double GcvEvaluator::value(double lambda) const {
  const Matrix m = sjt_sj_ + lambda * h_;
  const Matrix x = solve_least_squares(m, sjt_s_ + lambda * kt_s_).x;  // C S = S_J x
  const double resid = s_norm2_ - 2.0 * (sjt_s_.cwiseProduct(x)).sum() +
                       (x.transpose() * sjt_sj_ * x).trace();
  const double den = denominator(lambda);
  return std::max(0.0, resid) / (den * den);
}

double GcvEvaluator::value_uncached(double lambda) const {
  Matrix m = sj_.transpose() * sj_;
  Matrix right = sj_;
  for (std::size_t p = 0; p < gaj_.size(); ++p) {
    m += lambda * gaj_[p].transpose() * gaj_[p];
    right += lambda * gomega_[p].transpose() * gaj_[p];
  }
  const Matrix c = sj_ * solve_least_squares(m, right.transpose()).x;
  const Matrix ic = Matrix::Identity(ell_, ell_) - c;
  const double den = ic.trace();
  return (ic * s_).squaredNorm() / (den * den);
}

GoldenResult golden_section_min(const std::function<double(double)>& f, double lo, double hi,
                                double tol, int max_iter) {
  require(lo > 0.0 && lo < hi, ErrorKind::Config, "search interval must satisfy 0 < lo < hi");
  require(tol > 0.0, ErrorKind::Config, "tolerance must be positive");
  GoldenResult out;
  auto eval = [&](double u) {
    const double x = std::pow(10.0, u);
    const double v = f(x);
    out.trace.push_back({x, v});
    return v;
  };
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = std::log10(lo), b = std::log10(hi);
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = eval(c), fd = eval(d);
  int iter = 0;
  while (b - a > tol && iter < max_iter) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = eval(d);
    }
    ++iter;
  }
  out.converged = b - a <= tol;
  double best_u = 0.5 * (a + b);
  double best = eval(best_u);
  for (double u : {std::log10(lo), std::log10(hi)}) {
    const double v = eval(u);
    if (v < best) {
      best = v;
      best_u = u;
    }
  }
  out.x = std::clamp(std::pow(10.0, best_u), lo, hi);
  out.fx = best;
  return out;
}

double gradient_field_error(const GradientOperator& op, const Matrix& a, const Matrix& b) {
  const Matrix ga = estimate_gradient(op, a);
  const double den = ga.norm();
  const double num = estimate_gradient(op, Matrix(a - b)).norm();
  return den > 0.0 ? num / den : num;
}

}  // namespace streamid
