#pragma once

#include "streamid/column_select.hpp"
#include "streamid/gradient.hpp"
#include "streamid/sketching.hpp"
#include "streamid/stream_io.hpp"
#include "streamid/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace streamid {

enum class UpdatePolicy { Best, Alg4, Alg5, Alg6, Alg7 };

std::string to_string(UpdatePolicy p);
UpdatePolicy parse_update_policy(const std::string& s);

struct CompressorConfig {
  Index k = 10;
  Index t = 0;             // 0: same as k
  Index oversampling = 10;
  Index ell = 0;           // 0: max(k, t) + oversampling
  std::uint64_t seed = 0;
  double eps = 0.5;
  double delta = 0.05;
  double c = 1.0;
  ProjectionScaling scaling = ProjectionScaling::Scaled;
  bool identity_projection = false;
  UpdatePolicy policy = UpdatePolicy::Best;
  double split_c1 = 1.0 / 6.0;
  double split_c2 = 1.0 / 3.0;
  GradientMode gradient = GradientMode::None;
  GridGraph grid;
  double gradient_weight = 1.0;
  double gcv_lo = 1e-3;
  double gcv_hi = 1e3;
  double gcv_tol = 1e-3;
  int gcv_max_iter = 200;

  Index basis_size() const { return t > 0 ? t : k; }
  Index sketch_rows(Index m) const;
  CssParams css_params() const;
  /// Throws a Config error for anything inconsistent with an m x n input.
  void validate(Index m, Index n) const;

  nlohmann::json to_json() const;
  static CompressorConfig from_json(const nlohmann::json& j);
};

/// Single-pass randomized ID: ridge-leverage column selection on a Gaussian sketch,
/// four coefficient updaters per epoch, NA-Hutch++ error estimates to pick among them.
class StreamingCompressor {
 public:
  StreamingCompressor(const CompressorConfig& config, Index m);

  void push(const Vector& a);
  IDModel finish();

  const StreamingCss& css() const { return *css_; }
  const Projection& projection() const { return css_->projection(); }
  Index observed() const { return css_->sketch().observed(); }

 private:
  void update_coefficients();
  Matrix sketch_of_basis(const Matrix& s) const;
  void apply_gradient_coefficients();

  CompressorConfig config_;
  Index m_;
  std::shared_ptr<GradientOperator> op_;
  std::unique_ptr<StreamingCss> css_;

  std::vector<Matrix> omega_g_;                   // Omega G^p, l x m
  std::vector<std::vector<Vector>> grad_sketch_;  // Omega G^p a_j per column

  Matrix p_;
  std::vector<std::uint64_t> j_prev_;
  Matrix prev_basis_;
  bool have_prev_ = false;
  ModelMeta meta_;
};

IDModel compress(ColumnSource& stream, const CompressorConfig& config);

}  // namespace streamid
