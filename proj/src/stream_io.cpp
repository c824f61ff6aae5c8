#include "streamid/stream_io.hpp"

#include "streamid/rng.hpp"

#include <bit>
#include <cmath>
#include <cstring>

namespace streamid {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts need byte swapping");

namespace {

template <typename T>
void put(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const char* what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T)))
    throw Error(ErrorKind::Format, std::string("truncated file while reading ") + what);
  return value;
}

void put_pad(std::ostream& out, int count) {
  for (int i = 0; i < count; ++i) out.put('\0');
}

void read_doubles(std::istream& in, double* dst, std::size_t count, const char* what) {
  const auto bytes = static_cast<std::streamsize>(count * sizeof(double));
  in.read(reinterpret_cast<char*>(dst), bytes);
  if (in.gcount() != bytes) throw Error(ErrorKind::Format, std::string("truncated ") + what);
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  return out;
}

void finish_write(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

void write_matrix_header(std::ostream& out, std::uint64_t m, std::uint64_t n) {
  out.write(kMatrixMagic.data(), kMatrixMagic.size());
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint64_t>(out, m);
  put<std::uint64_t>(out, n);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(DType::F64));
  put_pad(out, 7);
}

MatrixHeader parse_matrix_header(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 4) throw Error(ErrorKind::Format, "truncated file: missing header");
  if (magic != kMatrixMagic) throw Error(ErrorKind::Format, "bad magic");
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kFormatVersion)
    throw Error(ErrorKind::Format, "unsupported version " + std::to_string(version));
  MatrixHeader h;
  h.m = get<std::uint64_t>(in, "m");
  h.n = get<std::uint64_t>(in, "n");
  const auto dtype = get<std::uint8_t>(in, "dtype");
  if (dtype != static_cast<std::uint8_t>(DType::F64))
    throw Error(ErrorKind::Format, "unsupported dtype " + std::to_string(dtype));
  std::array<char, 7> pad{};
  in.read(pad.data(), pad.size());
  if (in.gcount() != 7) throw Error(ErrorKind::Format, "truncated file: header padding");
  if (h.m == 0) throw Error(ErrorKind::Format, "truncated/invalid m");
  if (h.n == 0) throw Error(ErrorKind::Format, "truncated/invalid n");
  return h;
}

}  // namespace

// ----------------------------------------------------------------- streams --

ColumnStream::ColumnStream(const std::filesystem::path& path)
    : in_(path, std::ios::binary) {
  if (!in_) throw Error(ErrorKind::Io, "cannot open " + path.string());
  header_ = parse_matrix_header(in_);
  std::error_code ec;
  if (std::filesystem::is_regular_file(path, ec)) {
    const auto size = std::filesystem::file_size(path, ec);
    const auto expected = kMatrixHeaderBytes + header_.m * header_.n * sizeof(double);
    if (!ec && size < expected) throw Error(ErrorKind::Format, "truncated file: payload too short");
    if (!ec && size > expected) throw Error(ErrorKind::Format, "trailing bytes after payload");
  }
}

bool ColumnStream::next(Vector& out) {
  if (cursor_ >= cols()) return false;
  out.resize(rows());
  read_doubles(in_, out.data(), header_.m, "column payload");
  ++cursor_;
  return true;
}

bool MemoryColumnStream::next(Vector& out) {
  if (cursor_ >= data_.cols()) return false;
  out = data_.col(cursor_++);
  return true;
}

ColumnStream open_column_stream(const std::filesystem::path& path) { return ColumnStream(path); }

MatrixHeader read_matrix_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return parse_matrix_header(in);
}

void write_matrix(const std::filesystem::path& path, std::span<const Vector> columns) {
  require(!columns.empty(), ErrorKind::Config, "write_matrix: no columns");
  const Index m = columns.front().size();
  require(m >= 1, ErrorKind::Config, "write_matrix: empty columns");
  for (const auto& c : columns)
    require(c.size() == m, ErrorKind::Config, "write_matrix: inconsistent column lengths");
  auto out = open_for_write(path);
  write_matrix_header(out, static_cast<std::uint64_t>(m), columns.size());
  for (const auto& c : columns)
    out.write(reinterpret_cast<const char*>(c.data()), static_cast<std::streamsize>(m * sizeof(double)));
  finish_write(out, path);
}

void write_matrix(const std::filesystem::path& path, const Matrix& a) {
  require(a.rows() >= 1 && a.cols() >= 1, ErrorKind::Config, "write_matrix: empty matrix");
  auto out = open_for_write(path);
  write_matrix_header(out, static_cast<std::uint64_t>(a.rows()), static_cast<std::uint64_t>(a.cols()));
  out.write(reinterpret_cast<const char*>(a.data()),
            static_cast<std::streamsize>(a.size() * sizeof(double)));
  finish_write(out, path);
}

void write_matrix(const std::filesystem::path& path, ColumnSource& source) {
  require(source.rows() >= 1 && source.cols() - source.position() >= 1, ErrorKind::Config,
          "write_matrix: empty source");
  auto out = open_for_write(path);
  write_matrix_header(out, static_cast<std::uint64_t>(source.rows()),
                      static_cast<std::uint64_t>(source.cols() - source.position()));
  Vector col;
  while (source.next(col))
    out.write(reinterpret_cast<const char*>(col.data()),
              static_cast<std::streamsize>(col.size() * sizeof(double)));
  finish_write(out, path);
}

Matrix read_dense(ColumnSource& source, std::uint64_t budget) {
  check_budget(source.rows(), source.cols(), budget);
  Matrix a(source.rows(), source.cols() - source.position());
  Vector col;
  for (Index j = 0; source.next(col); ++j) a.col(j) = col;
  return a;
}

Matrix read_dense(const std::filesystem::path& path, std::uint64_t budget) {
  auto stream = open_column_stream(path);
  return read_dense(stream, budget);
}

// ------------------------------------------------------------------- model --

std::string to_string(GradientMode g) {
  switch (g) {
    case GradientMode::None: return "none";
    case GradientMode::Css: return "css";
    case GradientMode::Coeff: return "coeff";
    case GradientMode::Both: return "both";
  }
  return "none";
}

GradientMode parse_gradient_mode(const std::string& s) {
  if (s == "none") return GradientMode::None;
  if (s == "css") return GradientMode::Css;
  if (s == "coeff") return GradientMode::Coeff;
  if (s == "both") return GradientMode::Both;
  throw Error(ErrorKind::Config, "unknown gradient mode '" + s + "'");
}

nlohmann::json trailer_to_json(const ModelMeta& meta) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : meta.epochs) {
    epochs.push_back({{"n_obs", e.n_obs},
                      {"chosen", e.chosen},
                      {"est_rel", e.est_rel},
                      {"degraded", e.degraded},
                      {"evicted", e.evicted},
                      {"admitted", e.admitted},
                      {"clamped", e.clamped}});
  }
  nlohmann::json j;
  j["epochs"] = std::move(epochs);
  j["est_rel_error"] = meta.est_rel_error;
  j["est_abs_error"] = meta.est_abs_error;
  j["lambda_star"] = meta.lambda_star ? nlohmann::json(*meta.lambda_star) : nlohmann::json(nullptr);
  j["gcv_trace"] = meta.gcv_trace;
  j["degraded"] = meta.degraded;
  j["config"] = meta.config;
  return j;
}

void trailer_from_json(const nlohmann::json& j, ModelMeta& meta) {
  meta.epochs.clear();
  for (const auto& e : j.at("epochs")) {
    EpochRecord r;
    r.n_obs = e.at("n_obs").get<std::uint64_t>();
    r.chosen = e.at("chosen").get<int>();
    r.est_rel = e.at("est_rel").get<std::array<double, 4>>();
    r.degraded = e.at("degraded").get<std::array<bool, 4>>();
    r.evicted = e.at("evicted").get<std::uint64_t>();
    r.admitted = e.at("admitted").get<std::uint64_t>();
    r.clamped = e.at("clamped").get<bool>();
    meta.epochs.push_back(r);
  }
  meta.est_rel_error = j.at("est_rel_error").get<double>();
  meta.est_abs_error = j.at("est_abs_error").get<double>();
  const auto& lam = j.at("lambda_star");
  meta.lambda_star = lam.is_null() ? std::nullopt : std::optional<double>(lam.get<double>());
  meta.gcv_trace = j.at("gcv_trace").get<std::vector<std::array<double, 2>>>();
  meta.degraded = j.at("degraded").get<bool>();
  meta.config = j.at("config");
}

void write_id_model(const std::filesystem::path& path, const IDModel& model) {
  const auto t = model.t();
  require(model.m >= 1 && model.n >= 1, ErrorKind::Config, "model: empty dimensions");
  require(model.basis.rows() == static_cast<Index>(model.m) &&
              model.basis.cols() == static_cast<Index>(t),
          ErrorKind::Config, "model: basis shape does not match m x t");
  require(model.coeffs.rows() == static_cast<Index>(t) &&
              model.coeffs.cols() == static_cast<Index>(model.n),
          ErrorKind::Config, "model: coefficient shape does not match t x n");
  for (auto idx : model.indices)
    require(idx == kVacant || idx < model.n, ErrorKind::Config, "model: index out of range");

  auto out = open_for_write(path);
  out.write(kModelMagic.data(), kModelMagic.size());
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint64_t>(out, model.m);
  put<std::uint64_t>(out, model.n);
  put<std::uint64_t>(out, t);
  put<std::uint64_t>(out, model.meta.k);
  put<std::uint64_t>(out, model.meta.ell);
  put<std::uint64_t>(out, model.meta.seed);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(model.meta.gradient));
  put_pad(out, 7);
  for (auto idx : model.indices) put<std::uint64_t>(out, idx);
  out.write(reinterpret_cast<const char*>(model.basis.data()),
            static_cast<std::streamsize>(model.basis.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(model.coeffs.data()),
            static_cast<std::streamsize>(model.coeffs.size() * sizeof(double)));
  const std::string trailer = trailer_to_json(model.meta).dump();
  put<std::uint64_t>(out, trailer.size());
  out.write(trailer.data(), static_cast<std::streamsize>(trailer.size()));
  finish_write(out, path);
}

IDModel read_id_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 4) throw Error(ErrorKind::Format, "truncated file: missing header");
  if (magic != kModelMagic) throw Error(ErrorKind::Format, "bad magic");
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kFormatVersion)
    throw Error(ErrorKind::Format, "version mismatch: " + std::to_string(version));

  IDModel model;
  model.m = get<std::uint64_t>(in, "m");
  model.n = get<std::uint64_t>(in, "n");
  const auto t = get<std::uint64_t>(in, "t");
  model.meta.k = get<std::uint64_t>(in, "k");
  model.meta.ell = get<std::uint64_t>(in, "l");
  model.meta.seed = get<std::uint64_t>(in, "seed");
  const auto mode = get<std::uint8_t>(in, "gradient_mode");
  if (mode > 3) throw Error(ErrorKind::Format, "invalid gradient mode byte");
  model.meta.gradient = static_cast<GradientMode>(mode);
  std::array<char, 7> pad{};
  in.read(pad.data(), pad.size());
  if (in.gcount() != 7) throw Error(ErrorKind::Format, "truncated file: header padding");
  if (model.m == 0 || model.n == 0) throw Error(ErrorKind::Format, "invalid model dimensions");

  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  const std::uint64_t fixed = 64 + 8 * t + 8 * (model.m * t + t * model.n) + 8;
  if (!ec && size < fixed) throw Error(ErrorKind::Format, "truncated model payload");

  model.indices.resize(t);
  for (auto& idx : model.indices) {
    idx = get<std::uint64_t>(in, "indices");
    if (idx != kVacant && idx >= model.n) throw Error(ErrorKind::Format, "model index out of range");
  }
  model.basis.resize(static_cast<Index>(model.m), static_cast<Index>(t));
  read_doubles(in, model.basis.data(), model.m * t, "basis payload");
  model.coeffs.resize(static_cast<Index>(t), static_cast<Index>(model.n));
  read_doubles(in, model.coeffs.data(), t * model.n, "coefficient payload");

  const auto len = get<std::uint64_t>(in, "trailer length");
  if (!ec && fixed + len != size) throw Error(ErrorKind::Format, "corrupted trailer: length mismatch");
  std::string trailer(len, '\0');
  in.read(trailer.data(), static_cast<std::streamsize>(len));
  if (static_cast<std::uint64_t>(in.gcount()) != len)
    throw Error(ErrorKind::Format, "corrupted trailer: truncated");
  try {
    trailer_from_json(nlohmann::json::parse(trailer), model.meta);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("corrupted trailer: ") + e.what());
  }
  return model;
}

Matrix reconstruct(const IDModel& model, Index first, Index last) {
  require(first >= 0 && first <= last && last <= static_cast<Index>(model.n), ErrorKind::Config,
          "reconstruct: range [" + std::to_string(first) + ", " + std::to_string(last) +
              ") out of bounds for n = " + std::to_string(model.n));
  return model.basis * model.coeffs.middleCols(first, last - first);
}

// -------------------------------------------------------------- generators --

LowRankSource::LowRankSource(Index m, Index n, Index r, double sigma, std::uint64_t seed)
    : sigma_(sigma), seed_(seed) {
  require(m >= 1 && n >= 1, ErrorKind::Config, "gen_lowrank: m and n must be positive");
  require(r >= 0 && r <= std::min(m, n), ErrorKind::Config, "gen_lowrank: r > min(m, n)");
  require(sigma >= 0.0, ErrorKind::Config, "gen_lowrank: noise must be non-negative");
  Rng rng(derive_seed(seed, 0));
  left_ = gaussian_matrix(m, r, rng);
  right_ = gaussian_matrix(n, r, rng);
}

bool LowRankSource::next(Vector& out) {
  if (cursor_ >= cols()) return false;
  out = left_ * right_.row(cursor_).transpose();
  if (sigma_ > 0.0) {
    Rng rng(derive_seed(seed_, 1000 + static_cast<std::uint64_t>(cursor_)));
    out += sigma_ * gaussian_matrix(rows(), 1, rng);
  }
  ++cursor_;
  return true;
}

AdvectingBumpSource::AdvectingBumpSource(Index nx, Index ny, Index steps, std::uint64_t seed)
    : nx_(nx), ny_(ny), steps_(steps) {
  require(nx >= 4 && ny >= 4, ErrorKind::Config, "gen_advecting_bump: grid must be at least 4x4");
  require(steps >= 1, ErrorKind::Config, "gen_advecting_bump: need at least one step");
  width_ = std::max(1.0, 0.05 * static_cast<double>(std::min(nx, ny)));
  const double margin = 3.0 * width_;
  const std::array<double, 2> lo{margin, margin};
  const std::array<double, 2> hi{static_cast<double>(nx - 1) - margin,
                                 static_cast<double>(ny - 1) - margin};
  Rng rng(derive_seed(seed, 0));
  auto draw = [&]() {
    std::array<double, 2> p{};
    for (int a = 0; a < 2; ++a) {
      if (hi[a] <= lo[a]) {
        p[a] = 0.5 * (lo[a] + hi[a]);
      } else {
        p[a] = lo[a] + (hi[a] - lo[a]) * uniform01(rng);
      }
    }
    return p;
  };
  // Long paths keep the stream far from low rank: start and end at least three widths
  // and half the interior diagonal apart, when the box allows it.
  const double min_sep =
      std::max(3.0 * width_, 0.5 * std::hypot(std::max(0.0, hi[0] - lo[0]), std::max(0.0, hi[1] - lo[1])));
  for (int attempt = 0; attempt < 1000; ++attempt) {
    control_ = {draw(), draw(), draw()};
    const double dx = control_[2][0] - control_[0][0];
    const double dy = control_[2][1] - control_[0][1];
    if (std::hypot(dx, dy) >= min_sep) break;
  }
}

std::array<double, 2> AdvectingBumpSource::center(Index s) const {
  const double tau = steps_ > 1 ? static_cast<double>(s) / static_cast<double>(steps_ - 1) : 0.0;
  const double w0 = (1 - tau) * (1 - tau), w1 = 2 * tau * (1 - tau), w2 = tau * tau;
  return {w0 * control_[0][0] + w1 * control_[1][0] + w2 * control_[2][0],
          w0 * control_[0][1] + w1 * control_[1][1] + w2 * control_[2][1]};
}

bool AdvectingBumpSource::next(Vector& out) {
  if (cursor_ >= steps_) return false;
  const auto c = center(cursor_);
  out.resize(nx_ * ny_);
  const double inv = 1.0 / (2.0 * width_ * width_);
  for (Index j = 0; j < ny_; ++j) {
    for (Index i = 0; i < nx_; ++i) {
      const double dx = static_cast<double>(i) - c[0];
      const double dy = static_cast<double>(j) - c[1];
      out(i + nx_ * j) = std::exp(-(dx * dx + dy * dy) * inv);
    }
  }
  ++cursor_;
  return true;
}

LowRankSource gen_lowrank(Index m, Index n, Index r, double sigma, std::uint64_t seed) {
  return LowRankSource(m, n, r, sigma, seed);
}

AdvectingBumpSource gen_advecting_bump(Index nx, Index ny, Index steps, std::uint64_t seed) {
  return AdvectingBumpSource(nx, ny, steps, seed);
}

}  // namespace streamid
