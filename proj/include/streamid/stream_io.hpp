#pragma once

#include "streamid/types.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace streamid {

// ---------------------------------------------------------------------------
// Matrix stream format v1
//
//   "DMS1" | u32 version=1 | u64 m | u64 n | u8 dtype (0 = f64 LE) | 7 pad
//   followed by n columns of m little-endian f64 values.
// ---------------------------------------------------------------------------

inline constexpr std::array<char, 4> kMatrixMagic{'D', 'M', 'S', '1'};
inline constexpr std::array<char, 4> kModelMagic{'I', 'D', 'Z', '1'};
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kMatrixHeaderBytes = 32;

enum class DType : std::uint8_t { F64 = 0 };

struct MatrixHeader {
  std::uint64_t m = 0;
  std::uint64_t n = 0;
  DType dtype = DType::F64;
  bool column_major = true;
};

/// Sequential, single-consumer source of length-m columns.
class ColumnSource {
 public:
  virtual ~ColumnSource() = default;
  virtual Index rows() const = 0;
  virtual Index cols() const = 0;
  /// Index of the column the next call to `next` yields.
  virtual Index position() const = 0;
  /// Writes the next column into `out`; false once all columns have been yielded.
  virtual bool next(Vector& out) = 0;
};

/// File-backed DMS1 reader. Never seeks; reads each column exactly once.
class ColumnStream final : public ColumnSource {
 public:
  explicit ColumnStream(const std::filesystem::path& path);

  const MatrixHeader& header() const { return header_; }
  Index rows() const override { return static_cast<Index>(header_.m); }
  Index cols() const override { return static_cast<Index>(header_.n); }
  Index position() const override { return cursor_; }
  bool next(Vector& out) override;

 private:
  std::ifstream in_;
  MatrixHeader header_;
  Index cursor_ = 0;
};

/// Streams the columns of an in-memory matrix.
class MemoryColumnStream final : public ColumnSource {
 public:
  explicit MemoryColumnStream(Matrix data) : data_(std::move(data)) {}
  Index rows() const override { return data_.rows(); }
  Index cols() const override { return data_.cols(); }
  Index position() const override { return cursor_; }
  bool next(Vector& out) override;

 private:
  Matrix data_;
  Index cursor_ = 0;
};

ColumnStream open_column_stream(const std::filesystem::path& path);

/// Reads only the header of a DMS1 file.
MatrixHeader read_matrix_header(const std::filesystem::path& path);

void write_matrix(const std::filesystem::path& path, std::span<const Vector> columns);
void write_matrix(const std::filesystem::path& path, const Matrix& a);
/// Drains `source` into a DMS1 file without materializing it.
void write_matrix(const std::filesystem::path& path, ColumnSource& source);

/// Drains `source` into a dense matrix; refuses sizes above `budget` elements.
Matrix read_dense(ColumnSource& source, std::uint64_t budget = kDefaultOracleBudget);
Matrix read_dense(const std::filesystem::path& path, std::uint64_t budget = kDefaultOracleBudget);

// ---------------------------------------------------------------------------
// Compressed model format v1
//
//   "IDZ1" | u32 version=1 | u64 m | u64 n | u64 t | u64 k | u64 l | u64 seed
//   | u8 gradient_mode | 7 pad | t x u64 indices (kVacant for empty slots)
//   | m*t f64 basis, column-major | t*n f64 coefficients, column-major
//   | u64 trailer length | UTF-8 JSON trailer
// ---------------------------------------------------------------------------

enum class GradientMode : std::uint8_t { None = 0, Css = 1, Coeff = 2, Both = 3 };

inline bool uses_gradient_css(GradientMode g) {
  return g == GradientMode::Css || g == GradientMode::Both;
}
inline bool uses_gradient_coeff(GradientMode g) {
  return g == GradientMode::Coeff || g == GradientMode::Both;
}
std::string to_string(GradientMode g);
GradientMode parse_gradient_mode(const std::string& s);

/// What happened at one buffer flush of the streaming compressor.
struct EpochRecord {
  std::uint64_t n_obs = 0;
  int chosen = 4;                          // coefficient algorithm 4..7
  std::array<double, 4> est_rel{};         // estimated relative error per algorithm
  std::array<bool, 4> degraded{};          // rank-deficient solve per algorithm
  std::uint64_t evicted = 0;
  std::uint64_t admitted = 0;
  bool clamped = false;                    // chosen estimate hit the zero floor

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct ModelMeta {
  std::uint64_t k = 0;
  std::uint64_t ell = 0;
  std::uint64_t seed = 0;
  GradientMode gradient = GradientMode::None;
  std::vector<EpochRecord> epochs;
  double est_rel_error = 0.0;
  double est_abs_error = 0.0;
  std::optional<double> lambda_star;
  std::vector<std::array<double, 2>> gcv_trace;  // (lambda, GCV) pairs evaluated
  bool degraded = false;
  nlohmann::json config = nlohmann::json::object();

  friend bool operator==(const ModelMeta&, const ModelMeta&) = default;
};

/// Column interpolative decomposition A ~ basis * coeffs, basis = A(:, indices).
struct IDModel {
  std::uint64_t m = 0;
  std::uint64_t n = 0;
  std::vector<std::uint64_t> indices;  // length t
  Matrix basis;                        // m x t
  Matrix coeffs;                       // t x n
  ModelMeta meta;

  std::uint64_t t() const { return indices.size(); }
};

void write_id_model(const std::filesystem::path& path, const IDModel& model);
IDModel read_id_model(const std::filesystem::path& path);

nlohmann::json trailer_to_json(const ModelMeta& meta);
void trailer_from_json(const nlohmann::json& j, ModelMeta& meta);

/// basis * coeffs(:, first:last) for the half-open column range [first, last).
Matrix reconstruct(const IDModel& model, Index first, Index last);
inline Matrix reconstruct(const IDModel& model) {
  return reconstruct(model, 0, static_cast<Index>(model.n));
}

// ---------------------------------------------------------------------------
// Synthetic generators. Columns are computed on demand so arbitrarily long
// streams can be written without a dense copy.
// ---------------------------------------------------------------------------

/// A = U V^T + sigma N with Gaussian U (m x r), V (n x r), N (m x n).
class LowRankSource final : public ColumnSource {
 public:
  LowRankSource(Index m, Index n, Index r, double sigma, std::uint64_t seed);
  Index rows() const override { return left_.rows(); }
  Index cols() const override { return right_.rows(); }
  Index position() const override { return cursor_; }
  bool next(Vector& out) override;

 private:
  Matrix left_;   // m x r
  Matrix right_;  // n x r
  double sigma_;
  std::uint64_t seed_;
  Index cursor_ = 0;
};

/// 2-D Gaussian bump moving along a seeded curved path on an nx-by-ny grid.
/// Columns are vectorized with x fastest (node = i + nx * j).
class AdvectingBumpSource final : public ColumnSource {
 public:
  AdvectingBumpSource(Index nx, Index ny, Index steps, std::uint64_t seed);
  Index rows() const override { return nx_ * ny_; }
  Index cols() const override { return steps_; }
  Index position() const override { return cursor_; }
  bool next(Vector& out) override;

  double width() const { return width_; }
  /// Bump center (grid units) at time step s.
  std::array<double, 2> center(Index s) const;

 private:
  Index nx_, ny_, steps_;
  double width_;
  std::array<std::array<double, 2>, 3> control_{};  // quadratic Bezier control points
  Index cursor_ = 0;
};

LowRankSource gen_lowrank(Index m, Index n, Index r, double sigma, std::uint64_t seed);
AdvectingBumpSource gen_advecting_bump(Index nx, Index ny, Index steps, std::uint64_t seed);

}  // namespace streamid
