#pragma once

#include "streamid/types.hpp"

#include <cstdint>
#include <random>

namespace streamid {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent sub-seeds from one user seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Sub-seed streams. Changing these changes every seeded result.
namespace seed_stream {
inline constexpr std::uint64_t kProjection = 1;
inline constexpr std::uint64_t kSelection = 2;
inline constexpr std::uint64_t kEstimator = 3;
inline constexpr std::uint64_t kScoreProjection = 4;
inline constexpr std::uint64_t kBaseline = 5;
}  // namespace seed_stream

/// i.i.d. N(0,1) entries filled in column-major order.
inline Matrix gaussian_matrix(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  return out;
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace streamid
