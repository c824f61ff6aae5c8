#include "oracles.hpp"
#include "test_util.hpp"

#include "streamid/coefficients.hpp"
#include "streamid/error_estimate.hpp"
#include "streamid/sketching.hpp"
#include "streamid/stream_io.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace streamid;
using testing_support::random_matrix;

namespace {

struct Instance {
  Matrix a, aj, p, s, sj, gram;
  Projection proj;
};

// Exactly represented data: A = A_J P with A of rank r, so A (A_J P)^T = A A^T.
Instance exact_instance(Index m, Index n, Index r, Index ell, std::uint64_t seed) {
  Instance in;
  in.a = random_matrix(m, r, seed) * random_matrix(r, n, seed + 1);
  in.aj = in.a.leftCols(r);
  in.p = oracle::least_squares(in.aj, in.a);
  in.proj = make_projection(ell, m, seed + 2);
  in.s = in.proj.apply(in.a);
  in.sj = in.proj.apply(in.aj);
  in.gram = in.aj.transpose() * in.aj;
  return in;
}

double cross_estimate(const Instance& in, const Matrix& p, std::uint64_t split_seed) {
  const EstimatorSplit split = EstimatorSplit::make(in.s.rows(), split_seed);
  return estimate_cross_trace(in.s, in.sj * p, p, in.gram, split, in.proj.row_second_moment()).value;
}

}  // namespace

TEST_SUITE("error_estimate") {
  TEST_CASE("split sizes and disjointness") {
    const EstimatorSplit s = EstimatorSplit::make(48, 3);
    CHECK(s.i1.size() == 8);
    CHECK(s.i2.size() == 16);
    CHECK(s.i3.size() == 24);
    std::set<Index> all;
    for (const auto* part : {&s.i1, &s.i2, &s.i3}) all.insert(part->begin(), part->end());
    CHECK(all.size() == 48);
    CHECK(*all.rbegin() == 47);
    CHECK_THROWS_AS(EstimatorSplit::make(3, 0), Error);
    CHECK_THROWS_AS(EstimatorSplit::make(30, 0, 0.4, 0.3), Error);
  }

  TEST_CASE("Hutchinson on known traces") {
    CHECK(hutchinson_trace([](const Vector&) { return 0.0; }, 5, 10, 1) == 0.0);
    const double id = hutchinson_trace([](const Vector& w) { return w.squaredNorm(); }, 20, 2000, 4);
    CHECK(std::abs(id - 20.0) <= 2.0);
    int ok = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const double est = hutchinson_trace(
          [](const Vector& w) { return w(0) * w(0) + 2 * w(1) * w(1) + 3 * w(2) * w(2); }, 3, 2000,
          seed);
      ok += std::abs(est - 6.0) <= 0.15 * 6.0;
    }
    CHECK(ok >= 48);
    CHECK_THROWS_AS(hutchinson_trace([](const Vector&) { return 0.0; }, 3, 0, 1), Error);
  }

  TEST_CASE("zero coefficients give a zero cross term and the full norm") {
    const Instance in = exact_instance(20, 30, 3, 24, 1);
    const Matrix zero = Matrix::Zero(3, 30);
    CHECK(cross_estimate(in, zero, 2) == 0.0);
    const EstimatorSplit split = EstimatorSplit::make(24, 2);
    const ErrorReport r = estimate_frobenius_error(in.s, in.sj, zero, in.gram, in.a.squaredNorm(),
                                                   split, in.proj.row_second_moment());
    CHECK(r.est_abs * r.est_abs == doctest::Approx(in.a.squaredNorm()).epsilon(1e-14));
    CHECK(r.est_rel == doctest::Approx(1.0));
  }

  TEST_CASE("self representation under identity returns the squared norm") {
    // t = n = 2 keeps rank(A A^T) within |I1| = 2 rows of the identity sketch.
    const Matrix a = random_matrix(12, 2, 3);
    const Projection id = identity_projection(12);
    const Matrix p = Matrix::Identity(2, 2);
    const EstimatorSplit split = EstimatorSplit::make(12, 1);
    const CrossTrace c = estimate_cross_trace(a, a, p, a.transpose() * a, split, id.row_second_moment());
    CHECK(std::abs(c.value - a.squaredNorm()) <= 1e-8 * a.squaredNorm());
  }

  TEST_CASE("low-rank cross term is exact") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Index r = 1 + static_cast<Index>(seed % 8);  // at most |I1| = 8 at l = 48
      const Instance in = exact_instance(40, 60, r, 48, 100 + seed);
      const double truth = (in.a * (in.aj * in.p).transpose()).trace();
      const double est = cross_estimate(in, in.p, seed);
      CHECK(std::abs(est - truth) <= 1e-6 * std::abs(truth));
    }
  }

  TEST_CASE("dense error expansion identity") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Matrix a = random_matrix(15, 20, seed), aj = random_matrix(15, 4, seed + 50);
      const Matrix p = random_matrix(4, 20, seed + 99);
      const Matrix fit = aj * p;
      const double lhs = a.squaredNorm() - 2.0 * (a * fit.transpose()).trace() + fit.squaredNorm();
      const double rhs = (a - fit).squaredNorm();
      CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, rhs));
      const double fit2 = (aj.transpose() * aj * p * p.transpose()).trace();
      CHECK(std::abs(fit2 - fit.squaredNorm()) <= 1e-10 * fit.squaredNorm());
    }
  }

  TEST_CASE("perfect reconstruction estimates zero") {
    const Instance in = exact_instance(30, 40, 4, 30, 7);
    const EstimatorSplit split = EstimatorSplit::make(30, 2);
    const ErrorReport r = estimate_frobenius_error(in.s, in.sj, in.p, in.gram, in.a.squaredNorm(),
                                                   split, in.proj.row_second_moment());
    CHECK(r.est_rel <= 1e-6);
  }

  TEST_CASE("estimate is a deterministic function of sketch and split") {
    const Matrix a = random_matrix(20, 30, 5);
    const Matrix aj = a.leftCols(4);
    const Matrix p = oracle::least_squares(aj, a);
    const Projection proj = make_projection(24, 20, 1);
    const Matrix s = proj.apply(a), sj = proj.apply(aj), g = aj.transpose() * aj;
    auto run = [&] {
      return estimate_frobenius_error(s, sj, p, g, a.squaredNorm(), EstimatorSplit::make(24, 9),
                                      proj.row_second_moment())
          .est_abs;
    };
    CHECK(run() == run());
  }

  TEST_CASE("exact coefficients win against corrupted ones") {
    int ok = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      LowRankSource g = gen_lowrank(40, 60, 16, 0.1, seed);
      const Matrix a = read_dense(g);
      const Matrix aj = a.leftCols(8);
      const Matrix best = oracle::least_squares(aj, a);
      const double scale = best.norm();
      std::array<Matrix, 4> cands;
      for (int q = 0; q < 4; ++q)
        cands[static_cast<std::size_t>(q)] =
            best + (0.5 * scale / std::sqrt(static_cast<double>(best.size()))) *
                       random_matrix(8, 60, 1000 * seed + q);
      const int exact_slot = static_cast<int>(seed % 4);
      cands[static_cast<std::size_t>(exact_slot)] = best;
      const Projection proj = make_projection(32, 40, seed);
      const Selection sel = select_best_coefficients(
          proj.apply(a), proj.apply(aj), {&cands[0], &cands[1], &cands[2], &cands[3]},
          aj.transpose() * aj, a.squaredNorm(), EstimatorSplit::make(32, seed),
          proj.row_second_moment());
      ok += sel.index == exact_slot;
    }
    CHECK(ok >= 95);
  }

  TEST_CASE("identical candidates go to the first") {
    const Instance in = exact_instance(20, 25, 3, 24, 3);
    const Matrix p = in.p + 0.1 * random_matrix(3, 25, 4);
    const Selection sel = select_best_coefficients(in.s, in.sj, {&p, &p, &p, &p}, in.gram,
                                                   in.a.squaredNorm(), EstimatorSplit::make(24, 1),
                                                   in.proj.row_second_moment());
    CHECK(sel.index == 0);
  }

  TEST_CASE("graded candidates are ranked well enough") {
    const std::array<double, 4> target{0.02, 0.04, 0.20, 0.40};
    int ok = 0;
    const int seeds = 50;
    for (std::uint64_t seed = 0; seed < seeds; ++seed) {
      const Instance in = exact_instance(48, 80, 6, 64, 500 + seed);
      std::array<Matrix, 4> cands;
      std::array<double, 4> truth{};
      for (int q = 0; q < 4; ++q) {
        const Matrix d = random_matrix(6, 80, 7000 + 10 * seed + q);
        const double unit = (in.aj * d).norm() / in.a.norm();
        cands[q] = in.p + (target[q] / unit) * d;
        truth[q] = exact_frobenius_error(in.a, in.aj, cands[q]) / in.a.norm();
      }
      const Selection sel = select_best_coefficients(
          in.s, in.sj, {&cands[0], &cands[1], &cands[2], &cands[3]}, in.gram, in.a.squaredNorm(),
          EstimatorSplit::make(64, seed), in.proj.row_second_moment());
      ok += truth[sel.index] <= 1.5 * *std::min_element(truth.begin(), truth.end());
    }
    CHECK(ok >= 45);
  }

  TEST_CASE("estimator fidelity on moderate-error data") {
    int ok = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      LowRankSource g = gen_lowrank(64, 128, 16, 0.1, seed);
      const Matrix a = read_dense(g);
      const Matrix aj = a.leftCols(8);
      const Projection proj = make_projection(48, 64, seed);
      const Matrix s = proj.apply(a), sj = proj.apply(aj);
      const Matrix p = coeff_full_sketch({s, sj, aj, {0, 1, 2, 3, 4, 5, 6, 7}}).P;
      const ErrorReport r = estimate_frobenius_error(s, sj, p, aj.transpose() * aj, a.squaredNorm(),
                                                     EstimatorSplit::make(48, seed),
                                                     proj.row_second_moment());
      const double truth = exact_frobenius_error(a, aj, p) / a.norm();
      ok += std::abs(r.est_rel - truth) / truth <= 0.5;
    }
    CHECK(ok >= 45);
  }

  TEST_CASE("larger sketches do not estimate worse on average") {
    std::vector<double> mean_err;
    for (Index ell : {16, 32, 64}) {
      double sum = 0.0;
      for (std::uint64_t seed = 0; seed < 50; ++seed) {
        LowRankSource g = gen_lowrank(64, 100, 12, 0.1, 9);
        const Matrix a = read_dense(g);
        const Matrix aj = a.leftCols(6);
        const Matrix p = oracle::least_squares(aj, a);
        const Projection proj = make_projection(ell, 64, seed);
        const ErrorReport r = estimate_frobenius_error(
            proj.apply(a), proj.apply(aj), p, aj.transpose() * aj, a.squaredNorm(),
            EstimatorSplit::make(ell, seed), proj.row_second_moment());
        sum += std::abs(r.est_abs - exact_frobenius_error(a, aj, p));
      }
      mean_err.push_back(sum / 50.0);
    }
    CHECK(mean_err[1] <= mean_err[0]);
    CHECK(mean_err[2] <= mean_err[1]);
  }

  TEST_CASE("exact error oracle") {
    const Matrix a = random_matrix(9, 7, 1), aj = a.leftCols(3);
    CHECK(exact_frobenius_error(a, aj, Matrix::Zero(3, 7)) == doctest::Approx(a.norm()));
    const Matrix p = oracle::least_squares(aj, a);
    const double r = (a - aj * p).norm();
    CHECK(std::abs(exact_frobenius_error(a, aj, p) - r) <= 1e-12 * a.norm());
  }
}
