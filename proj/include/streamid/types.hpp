#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace streamid {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Index stored in a basis slot that holds no column.
inline constexpr std::uint64_t kVacant = std::numeric_limits<std::uint64_t>::max();

/// Dense copies larger than this many elements are refused by oracle paths.
inline constexpr std::uint64_t kDefaultOracleBudget = 10'000'000;

enum class ErrorKind {
  Config,     // invalid parameters; detected before data is read
  Io,         // file system failures
  Format,     // malformed or truncated files
  Numerical,  // unrecoverable numerical failure
  Budget,     // dense oracle budget exceeded
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

inline void check_budget(Index rows, Index cols, std::uint64_t budget) {
  if (static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(cols) > budget)
    throw Error(ErrorKind::Budget, "dense copy of " + std::to_string(rows) + "x" +
                                       std::to_string(cols) + " exceeds oracle budget");
}

}  // namespace streamid
