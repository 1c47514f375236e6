#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace dbrlab {

// All numerics are dense double matrices, row-major so that unit-wise (row)
// operations are contiguous.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

// Invalid user input: bad config values, malformed files, inconsistent shapes
// at the public surface. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Runtime failure: numerical divergence, non-finite values, I/O errors.
// The CLI maps this to exit code 3.
class RuntimeError : public std::runtime_error {
 public:
  explicit RuntimeError(const std::string& msg) : std::runtime_error(msg) {}
};

inline std::string shape_str(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_finite(const Mat& m, const std::string& what) {
  if (!m.allFinite()) {
    throw RuntimeError(what + ": non-finite value encountered (" + shape_str(m) + ")");
  }
}

}  // namespace dbrlab
