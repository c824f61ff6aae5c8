#include "oracles.hpp"
#include "seek_guard.hpp"
#include "test_util.hpp"

#include "streamid/baselines.hpp"
#include "streamid/cli.hpp"
#include "streamid/pipeline.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace streamid;
using testing_support::file_bytes;
using testing_support::random_matrix;
using testing_support::ScratchDir;
using testing_support::SeekGuard;
using testing_support::TraversalLog;

namespace {

StreamOpener guarded(TraversalLog& log) {
  return [&log](const std::filesystem::path& p) -> std::unique_ptr<ColumnSource> {
    return std::make_unique<SeekGuard>(open_file_source(p), log);
  };
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "streamid");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("exact-rank compression through files") {
    ScratchDir dir;
    LowRankSource g = gen_lowrank(200, 500, 10, 0.0, 1);
    write_matrix(dir / "a.dms", g);
    CompressorConfig cfg;
    cfg.k = 10;
    cfg.ell = 40;
    cfg.seed = 1;
    TraversalLog log;
    const IDModel model = cmd_compress(dir / "a.dms", dir / "a.idz", cfg, guarded(log));
    CHECK(log.opens == 1);
    CHECK(log.completed == 1);
    CHECK(log.rewinds == 0);
    CHECK(log.columns_read == 500);
    const nlohmann::json rep = cmd_eval(dir / "a.idz", dir / "a.dms");
    CHECK(rep["true_rel_error"].get<double>() <= 1e-6);
    CHECK(rep["epochs"].size() == 50);
    CHECK(model.meta.epochs.size() == 50);
  }

  TEST_CASE("identical runs give identical model files") {
    ScratchDir dir;
    LowRankSource g = gen_lowrank(30, 70, 5, 0.1, 2);
    write_matrix(dir / "a.dms", g);
    CompressorConfig cfg;
    cfg.k = 5;
    cfg.seed = 11;
    cmd_compress(dir / "a.dms", dir / "1.idz", cfg);
    cmd_compress(dir / "a.dms", dir / "2.idz", cfg);
    CHECK(file_bytes(dir / "1.idz") == file_bytes(dir / "2.idz"));
    cfg.seed = 12;
    cmd_compress(dir / "a.dms", dir / "3.idz", cfg);
    CHECK(file_bytes(dir / "1.idz") != file_bytes(dir / "3.idz"));
  }

  TEST_CASE("stored config reproduces the model") {
    ScratchDir dir;
    LowRankSource g = gen_lowrank(25, 40, 4, 0.2, 3);
    write_matrix(dir / "a.dms", g);
    CompressorConfig cfg;
    cfg.k = 3;
    cfg.t = 5;
    cfg.seed = 4;
    cfg.policy = UpdatePolicy::Alg6;
    cmd_compress(dir / "a.dms", dir / "1.idz", cfg);
    const IDModel m = read_id_model(dir / "1.idz");
    const CompressorConfig back = CompressorConfig::from_json(m.meta.config);
    CHECK(back.to_json() == cfg.to_json());
    cmd_compress(dir / "a.dms", dir / "2.idz", back);
    CHECK(file_bytes(dir / "1.idz") == file_bytes(dir / "2.idz"));
  }

  TEST_CASE("k larger than n fails before any column is read") {
    ScratchDir dir;
    write_matrix(dir / "a.dms", random_matrix(10, 4, 1));
    CompressorConfig cfg;
    cfg.k = 5;
    TraversalLog log;
    try {
      cmd_compress(dir / "a.dms", dir / "a.idz", cfg, guarded(log));
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Config);
    }
    CHECK(log.columns_read == 0);
    CHECK_FALSE(std::filesystem::exists(dir / "a.idz"));
  }

  TEST_CASE("reconstruct a self-representing model") {
    ScratchDir dir;
    const Matrix a = random_matrix(6, 4, 2);
    IDModel model;
    model.m = 6;
    model.n = 4;
    model.indices = {0, 1, 2, 3};
    model.basis = a;
    model.coeffs = Matrix::Identity(4, 4);
    write_id_model(dir / "m.idz", model);
    cmd_reconstruct(dir / "m.idz", dir / "full.dms");
    CHECK(oracle::rel_diff(read_dense(dir / "full.dms"), a) <= 1e-10);

    cmd_reconstruct(dir / "m.idz", dir / "one.dms", 2, 3);
    const MatrixHeader h = read_matrix_header(dir / "one.dms");
    CHECK(h.n == 1);
    CHECK(read_dense(dir / "one.dms").col(0) == a.col(2));

    write_matrix(dir / "lib.dms", reconstruct(model, 1, 4));
    CHECK(run({"reconstruct", "--model", (dir / "m.idz").string(), "--output",
               (dir / "cli.dms").string(), "--range", "1:4"}) == 0);
    CHECK(file_bytes(dir / "lib.dms") == file_bytes(dir / "cli.dms"));
  }

  TEST_CASE("eval of a zero-coefficient model") {
    ScratchDir dir;
    const Matrix a = random_matrix(5, 7, 3);
    write_matrix(dir / "a.dms", a);
    IDModel model;
    model.m = 5;
    model.n = 7;
    model.indices = {0, 3};
    model.basis = Matrix(5, 2);
    model.basis << a.col(0), a.col(3);
    model.coeffs = Matrix::Zero(2, 7);
    write_id_model(dir / "z.idz", model);
    const nlohmann::json rep = cmd_eval(dir / "z.idz", dir / "a.dms");
    CHECK(std::abs(rep["true_rel_error"].get<double>() - 1.0) <= 1e-12);
  }

  TEST_CASE("bench table shape and ordering") {
    LowRankSource g = gen_lowrank(40, 80, 10, 0.1, 5);
    const Matrix a = read_dense(g);
    BenchConfig bc;
    bc.methods = bench_methods();
    bc.ranks = {5, 10, 20};
    bc.base.seed = 2;
    const auto rows = bench_methods().size();
    const std::vector<BenchRow> out = cmd_bench(a, bc);
    REQUIRE(out.size() == rows * 3);
    const std::string csv = bench_to_csv(out);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(rows * 3 + 1));
    CHECK(bench_to_json(out).size() == rows * 3);
    for (Index k : bc.ranks) {
      double svd = 0.0, lowest = 1e300;
      for (const auto& r : out) {
        if (r.k != k) continue;
        CHECK(r.error.empty());
        if (r.method == "svd") svd = r.true_rel;
        lowest = std::min(lowest, r.true_rel);
      }
      CHECK(svd <= lowest + 1e-12);
    }
  }

  TEST_CASE("unknown bench methods are rejected") {
    BenchConfig bc;
    bc.methods = {"nope"};
    bc.ranks = {2};
    CHECK_THROWS_AS(cmd_bench(random_matrix(5, 5, 1), bc), Error);
  }

  TEST_CASE("identity projection and fixed policies") {
    LowRankSource g = gen_lowrank(20, 60, 4, 0.05, 7);
    const Matrix a = read_dense(g);
    for (auto pol : {UpdatePolicy::Alg4, UpdatePolicy::Alg5, UpdatePolicy::Alg6, UpdatePolicy::Alg7}) {
      CompressorConfig cfg;
      cfg.k = 4;
      cfg.t = 6;
      cfg.identity_projection = true;
      cfg.policy = pol;
      MemoryColumnStream s(a);
      const IDModel m = compress(s, cfg);
      for (const auto& e : m.meta.epochs) CHECK(e.chosen == static_cast<int>(pol) + 3);
      CHECK(m.meta.ell == 20);
      // With an exact sketch every updater is a least-squares fit on the final basis
      // (the QR warm start only for the columns it solved directly).
      std::vector<Index> occ;
      for (std::size_t i = 0; i < m.indices.size(); ++i)
        if (m.indices[i] != kVacant) occ.push_back(static_cast<Index>(i));
      if (pol != UpdatePolicy::Alg7) {
        Matrix cj(20, static_cast<Index>(occ.size()));
        for (std::size_t i = 0; i < occ.size(); ++i) cj.col(static_cast<Index>(i)) = m.basis.col(occ[i]);
        const double best = (a - cj * oracle::least_squares(cj, a)).norm() / a.norm();
        CHECK(relative_error(a, reconstruct(m)) <= best * (1 + 1e-9) + 1e-12);
      }
    }
  }

  TEST_CASE("gradient modes record the regularisation search") {
    AdvectingBumpSource src = gen_advecting_bump(12, 12, 40, 1);
    const Matrix a = read_dense(src);
    CompressorConfig cfg;
    cfg.k = 6;
    cfg.gradient = GradientMode::Both;
    cfg.grid.dims = {12, 12};
    MemoryColumnStream s(a);
    const IDModel m = compress(s, cfg);
    REQUIRE(m.meta.lambda_star.has_value());
    CHECK(*m.meta.lambda_star >= 1e-3);
    CHECK(*m.meta.lambda_star <= 1e3);
    CHECK(!m.meta.gcv_trace.empty());
    CHECK(m.meta.gradient == GradientMode::Both);

    cfg.grid.dims = {11, 12};
    MemoryColumnStream s2(a);
    CHECK_THROWS_AS(compress(s2, cfg), Error);
  }

  TEST_CASE("command-line exit codes") {
    ScratchDir dir;
    CHECK(run({"gen", "--kind", "lowrank", "--m", "20", "--n", "30", "--r", "3", "--output",
               (dir / "a.dms").string()}) == 0);
    CHECK(run({"compress", "--input", (dir / "a.dms").string(), "--output",
               (dir / "a.idz").string(), "--k", "3"}) == 0);
    CHECK(run({"eval", "--model", (dir / "a.idz").string(), "--original", (dir / "a.dms").string(),
               "--output", (dir / "e.json").string()}) == 0);
    CHECK(std::filesystem::exists(dir / "e.json"));
    CHECK(run({"bench", "--input", (dir / "a.dms").string(), "--methods", "svd,cpqr,rid-best",
               "--ranks", "2,3", "--json", (dir / "b.json").string(), "--csv",
               (dir / "b.csv").string()}) == 0);
    CHECK(run({"compress", "--input", (dir / "a.dms").string(), "--output",
               (dir / "b.idz").string(), "--k", "40"}) == 2);
    CHECK(run({"compress", "--input", (dir / "missing.dms").string(), "--output",
               (dir / "c.idz").string()}) == 3);
    CHECK(run({"compress", "--bogus"}) == 2);
    CHECK(run({"compress", "--input", (dir / "a.dms").string(), "--output",
               (dir / "d.idz").string(), "--policy", "alg9"}) == 2);
  }

  TEST_CASE("exit code mapping") {
    CHECK(exit_code_for(Error(ErrorKind::Config, "x")) == 2);
    CHECK(exit_code_for(Error(ErrorKind::Budget, "x")) == 2);
    CHECK(exit_code_for(Error(ErrorKind::Io, "x")) == 3);
    CHECK(exit_code_for(Error(ErrorKind::Format, "x")) == 3);
    CHECK(exit_code_for(Error(ErrorKind::Numerical, "x")) == 4);
  }
}
