#include "streamid/cli.hpp"

#include "streamid/baselines.hpp"
#include "streamid/coefficients.hpp"
#include "streamid/column_select.hpp"
#include "streamid/error_estimate.hpp"
#include "streamid/gradient.hpp"
#include "streamid/linalg.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace streamid {

std::unique_ptr<ColumnSource> open_file_source(const std::filesystem::path& path) {
  return std::make_unique<ColumnStream>(path);
}

IDModel cmd_compress(const std::filesystem::path& input, const std::filesystem::path& output,
                     const CompressorConfig& config, const StreamOpener& opener) {
  std::unique_ptr<ColumnSource> stream = opener(input);
  IDModel model = compress(*stream, config);
  write_id_model(output, model);
  return model;
}

void cmd_reconstruct(const std::filesystem::path& model_path, const std::filesystem::path& output,
                     std::optional<Index> first, std::optional<Index> last) {
  const IDModel model = read_id_model(model_path);
  const Index lo = first.value_or(0);
  const Index hi = last.value_or(static_cast<Index>(model.n));
  write_matrix(output, reconstruct(model, lo, hi));
}

nlohmann::json cmd_eval(const std::filesystem::path& model_path, const std::filesystem::path& original) {
  const IDModel model = read_id_model(model_path);
  ColumnStream stream(original);
  require(static_cast<std::uint64_t>(stream.rows()) == model.m &&
              static_cast<std::uint64_t>(stream.cols()) == model.n,
          ErrorKind::Config, "original and model dimensions differ");
  double err2 = 0.0, norm2 = 0.0;
  Vector a;
  while (stream.next(a)) {
    const Index j = stream.position() - 1;
    err2 += (a - model.basis * model.coeffs.col(j)).squaredNorm();
    norm2 += a.squaredNorm();
  }
  nlohmann::json out;
  out["m"] = model.m;
  out["n"] = model.n;
  out["t"] = model.t();
  out["true_abs_error"] = std::sqrt(err2);
  out["true_rel_error"] = norm2 > 0.0 ? std::sqrt(err2 / norm2) : std::sqrt(err2);
  out["est_rel_error"] = model.meta.est_rel_error;
  out["est_abs_error"] = model.meta.est_abs_error;
  out["epochs"] = trailer_to_json(model.meta).at("epochs");
  if (model.meta.lambda_star) out["lambda_star"] = *model.meta.lambda_star;
  return out;
}

const std::vector<std::string>& bench_methods() {
  static const std::vector<std::string> all{"svd",      "rsvd",     "cpqr",     "lev",
                                            "residual-css", "ridge-css", "fd-css", "rid-alg4",
                                            "rid-alg5", "rid-alg6", "rid-alg7", "rid-best"};
  return all;
}

namespace {

Matrix coefficients_for(const Matrix& a, const Matrix& cols) {
  return exact_least_squares(cols, a, std::numeric_limits<std::uint64_t>::max()).P;
}

Matrix columns_from(const Matrix& a, const std::vector<std::uint64_t>& idx) {
  std::vector<Index> keep;
  for (auto j : idx)
    if (j != kVacant) keep.push_back(static_cast<Index>(j));
  return select_columns(a, keep);
}

BenchRow run_method(const std::string& method, const Matrix& a, Index k, const BenchConfig& cfg,
                    const GradientOperator* op) {
  BenchRow row;
  row.method = method;
  row.k = k;
  const auto start = std::chrono::steady_clock::now();
  Matrix approx;
  const std::uint64_t seed = cfg.base.seed;
  if (method == "svd") {
    const LowRankFactors f = truncated_svd(a, k, cfg.budget);
    approx = f.left * f.right;
  } else if (method == "rsvd") {
    MemoryColumnStream s(a);
    const LowRankFactors f = randomized_svd_single_pass(
        s, k, k + cfg.base.oversampling, derive_seed(seed, seed_stream::kBaseline));
    approx = f.left * f.right;
  } else if (method == "cpqr") {
    const LowRankFactors f = cpqr_id(a, k, cfg.budget);
    approx = f.left * f.right;
  } else if (method == "lev") {
    const Matrix c = select_columns(a, offline_leverage_css(a, k, seed, cfg.budget));
    approx = c * coefficients_for(a, c);
  } else if (method == "residual-css") {
    const double total = a.squaredNorm();
    const double tail = std::pow(truncated_svd(a, k, cfg.budget).rel_error, 2) * total;
    const double xi = std::max(tail, 1e-12 * std::max(total, 1e-300));
    ResidualCssState st(a.rows(), seed, k);
    for (Index j = 0; j < a.cols(); ++j)
      residual_css_update(st, a.col(j), static_cast<std::uint64_t>(j), k, xi);
    const Matrix c = st.columns();
    approx = c * coefficients_for(a, c);
  } else if (method == "ridge-css" || method == "fd-css") {
    CompressorConfig c = cfg.base;
    c.k = k;
    c.t = k;
    MemoryColumnStream s(a);
    std::vector<std::uint64_t> idx;
    if (method == "ridge-css") {
      const Projection proj =
          c.identity_projection ? identity_projection(a.rows())
                                : make_projection(c.sketch_rows(a.rows()), a.rows(),
                                                  derive_seed(seed, seed_stream::kProjection), c.scaling);
      idx = run_streaming_css(s, proj, c.css_params(), seed).first.J;
    } else {
      idx = run_fd_streaming_css(s, c.css_params(), seed).J;
    }
    const Matrix cols = columns_from(a, idx);
    approx = cols * coefficients_for(a, cols);
  } else if (method.rfind("rid-", 0) == 0) {
    CompressorConfig c = cfg.base;
    c.k = k;
    c.t = k;
    c.policy = method == "rid-best" ? UpdatePolicy::Best : parse_update_policy(method.substr(4));
    MemoryColumnStream s(a);
    const IDModel model = compress(s, c);
    approx = reconstruct(model);
    row.est_rel = model.meta.est_rel_error;
    for (const auto& e : model.meta.epochs) row.chosen.push_back(e.chosen);
  } else {
    throw Error(ErrorKind::Config, "unknown bench method '" + method + "'");
  }
  row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  row.true_rel = relative_error(a, approx);
  if (op) row.grad_rel = gradient_field_error(*op, a, approx);
  return row;
}

}  // namespace

std::vector<BenchRow> cmd_bench(const Matrix& a, const BenchConfig& config) {
  check_budget(a.rows(), a.cols(), config.budget);
  for (const auto& m : config.methods)
    require(std::find(bench_methods().begin(), bench_methods().end(), m) != bench_methods().end(),
            ErrorKind::Config, "unknown bench method '" + m + "'");
  require(!config.ranks.empty(), ErrorKind::Config, "bench needs at least one rank");
  std::unique_ptr<GradientOperator> op;
  if (!config.base.grid.dims.empty() && config.base.grid.nodes() == a.rows())
    op = std::make_unique<GradientOperator>(build_gradient_operator(config.base.grid));

  std::vector<BenchRow> rows;
  for (Index k : config.ranks) {
    for (const auto& m : config.methods) {
      try {
        rows.push_back(run_method(m, a, k, config, op.get()));
      } catch (const std::exception& e) {
        BenchRow r;
        r.method = m;
        r.k = k;
        r.true_rel = std::numeric_limits<double>::quiet_NaN();
        r.error = e.what();
        rows.push_back(r);
      }
    }
  }
  return rows;
}

std::vector<BenchRow> cmd_bench(const std::filesystem::path& input, const BenchConfig& config) {
  return cmd_bench(read_dense(input, config.budget), config);
}

nlohmann::json bench_to_json(const std::vector<BenchRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j;
    j["method"] = r.method;
    j["k"] = r.k;
    j["true_rel_error"] = std::isnan(r.true_rel) ? nlohmann::json() : nlohmann::json(r.true_rel);
    j["est_rel_error"] = r.est_rel ? nlohmann::json(*r.est_rel) : nlohmann::json();
    j["grad_rel_error"] = r.grad_rel ? nlohmann::json(*r.grad_rel) : nlohmann::json();
    j["chosen"] = r.chosen;
    j["wall_ms"] = r.wall_ms;
    if (!r.error.empty()) j["error"] = r.error;
    out.push_back(j);
  }
  return out;
}

std::string bench_to_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out.precision(10);
  out << "method,k,true_rel_error,est_rel_error,grad_rel_error,wall_ms,error\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.k << ',';
    if (!std::isnan(r.true_rel)) out << r.true_rel;
    out << ',';
    if (r.est_rel) out << *r.est_rel;
    out << ',';
    if (r.grad_rel) out << *r.grad_rel;
    out << ',' << r.wall_ms << ',';
    if (!r.error.empty()) out << '"' << r.error << '"';
    out << '\n';
  }
  return out.str();
}

int exit_code_for(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    switch (err->kind()) {
      case ErrorKind::Config:
      case ErrorKind::Budget: return 2;
      case ErrorKind::Io:
      case ErrorKind::Format: return 3;
      case ErrorKind::Numerical: return 4;
    }
  }
  if (dynamic_cast<const CLI::Error*>(&e)) return 2;
  return 4;
}

namespace {

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !is.eof()) throw Error(ErrorKind::Config, std::string("invalid ") + what + " '" + text + "'");
    out.push_back(v);
  }
  return out;
}

struct ConfigFlags {
  CompressorConfig cfg;
  std::string gradient = "none";
  std::string grid;
  double spacing = 1.0;
  std::string split;
  std::string scaling = "scaled";
  std::string policy = "best";

  void attach(CLI::App* app) {
    app->add_option("--k", cfg.k, "target rank");
    app->add_option("--t", cfg.t, "basis size (default k)");
    app->add_option("--p", cfg.oversampling, "oversampling");
    app->add_option("--ell", cfg.ell, "sketch rows (default max(k,t)+p)");
    app->add_option("--seed", cfg.seed, "random seed");
    app->add_option("--eps", cfg.eps);
    app->add_option("--delta", cfg.delta);
    app->add_option("--c", cfg.c, "sampling constant");
    app->add_option("--gradient", gradient, "none|css|coeff|both");
    app->add_option("--grid", grid, "nx,ny[,nz]");
    app->add_option("--grid-spacing", spacing);
    app->add_option("--gradient-weight", cfg.gradient_weight);
    app->add_option("--gcv-tol", cfg.gcv_tol);
    app->add_option("--split", split, "c1,c2");
    app->add_option("--scaling", scaling, "scaled|unscaled");
    app->add_option("--policy", policy, "best|alg4|alg5|alg6|alg7");
  }

  CompressorConfig resolve() const {
    CompressorConfig c = cfg;
    c.gradient = parse_gradient_mode(gradient);
    if (!grid.empty()) {
      c.grid.dims = parse_list<Index>(grid, "grid");
      c.grid.spacing.assign(c.grid.dims.size(), spacing);
    }
    if (!split.empty()) {
      const auto v = parse_list<double>(split, "split");
      require(v.size() == 2, ErrorKind::Config, "split takes two fractions c1,c2");
      c.split_c1 = v[0];
      c.split_c2 = v[1];
    }
    if (scaling == "scaled") c.scaling = ProjectionScaling::Scaled;
    else if (scaling == "unscaled") c.scaling = ProjectionScaling::Unscaled;
    else throw Error(ErrorKind::Config, "unknown scaling '" + scaling + "'");
    c.policy = parse_update_policy(policy);
    return c;
  }
};

void apply_thread_limit() {
  const char* env = std::getenv("STREAMID_THREADS");
  if (!env || !*env) return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  require(end && *end == '\0' && n >= 1, ErrorKind::Config, "STREAMID_THREADS must be a positive integer");
  Eigen::setNbThreads(static_cast<int>(n));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Single-pass randomized interpolative decomposition"};
  app.require_subcommand(1);

  std::string input, output, model, original, range, json_out, csv_out;
  ConfigFlags flags;

  auto* compress_cmd = app.add_subcommand("compress", "compress a DMS1 matrix stream");
  compress_cmd->add_option("--input", input)->required();
  compress_cmd->add_option("--output", output)->required();
  flags.attach(compress_cmd);

  auto* recon_cmd = app.add_subcommand("reconstruct", "write basis * coefficients");
  recon_cmd->add_option("--model", model)->required();
  recon_cmd->add_option("--output", output)->required();
  recon_cmd->add_option("--range", range, "first:last (half-open)");

  auto* eval_cmd = app.add_subcommand("eval", "true vs. estimated error");
  eval_cmd->add_option("--model", model)->required();
  eval_cmd->add_option("--original", original)->required();
  eval_cmd->add_option("--output", json_out, "JSON report path (default stdout)");

  std::string methods = "svd,rsvd,cpqr,lev,residual-css,ridge-css,rid-alg4,rid-alg5,rid-alg6,rid-alg7,rid-best";
  std::string ranks = "10";
  std::uint64_t budget = kDefaultOracleBudget;
  auto* bench_cmd = app.add_subcommand("bench", "compare methods on a dense-sized input");
  bench_cmd->add_option("--input", input)->required();
  bench_cmd->add_option("--methods", methods);
  bench_cmd->add_option("--ranks", ranks);
  bench_cmd->add_option("--json", json_out);
  bench_cmd->add_option("--csv", csv_out);
  bench_cmd->add_option("--budget", budget);
  flags.attach(bench_cmd);

  std::string kind = "lowrank";
  Index gm = 200, gn = 500, gr = 10, nx = 32, ny = 32, steps = 200;
  double sigma = 0.0;
  std::uint64_t gseed = 0;
  auto* gen_cmd = app.add_subcommand("gen", "write a synthetic matrix stream");
  gen_cmd->add_option("--kind", kind, "lowrank|bump");
  gen_cmd->add_option("--m", gm);
  gen_cmd->add_option("--n", gn);
  gen_cmd->add_option("--r", gr);
  gen_cmd->add_option("--sigma", sigma);
  gen_cmd->add_option("--nx", nx);
  gen_cmd->add_option("--ny", ny);
  gen_cmd->add_option("--steps", steps);
  gen_cmd->add_option("--seed", gseed);
  gen_cmd->add_option("--output", output)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    apply_thread_limit();
    if (*compress_cmd) {
      const CompressorConfig cfg = flags.resolve();
      const MatrixHeader h = read_matrix_header(input);
      cfg.validate(static_cast<Index>(h.m), static_cast<Index>(h.n));
      const IDModel m = cmd_compress(input, output, cfg);
      std::cerr << "compressed " << m.m << "x" << m.n << " to t=" << m.t()
                << ", estimated relative error " << m.meta.est_rel_error << "\n";
    } else if (*recon_cmd) {
      std::optional<Index> lo, hi;
      if (!range.empty()) {
        const auto colon = range.find(':');
        require(colon != std::string::npos, ErrorKind::Config, "range must be first:last");
        lo = parse_list<Index>(range.substr(0, colon), "range").at(0);
        hi = parse_list<Index>(range.substr(colon + 1), "range").at(0);
      }
      cmd_reconstruct(model, output, lo, hi);
    } else if (*eval_cmd) {
      const std::string report = cmd_eval(model, original).dump(2) + "\n";
      if (json_out.empty()) std::cout << report;
      else write_text(json_out, report);
    } else if (*bench_cmd) {
      BenchConfig bc;
      bc.base = flags.resolve();
      bc.methods = parse_list<std::string>(methods, "methods");
      bc.ranks = parse_list<Index>(ranks, "ranks");
      bc.budget = budget;
      const auto rows = cmd_bench(std::filesystem::path(input), bc);
      const std::string js = bench_to_json(rows).dump(2) + "\n";
      if (json_out.empty()) std::cout << js;
      else write_text(json_out, js);
      if (!csv_out.empty()) write_text(csv_out, bench_to_csv(rows));
    } else if (*gen_cmd) {
      if (kind == "lowrank") {
        LowRankSource src = gen_lowrank(gm, gn, gr, sigma, gseed);
        write_matrix(output, src);
      } else if (kind == "bump") {
        AdvectingBumpSource src = gen_advecting_bump(nx, ny, steps, gseed);
        write_matrix(output, src);
      } else {
        throw Error(ErrorKind::Config, "unknown generator '" + kind + "'");
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return 0;
}

}  // namespace streamid
