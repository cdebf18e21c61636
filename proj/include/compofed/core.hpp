#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace compofed {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// Sample-major feature storage: row l is the feature vector of sample l.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised for every contract violation inside the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(message);
}

inline bool all_finite(const Eigen::Ref<const Vector>& v) {
  return v.allFinite();
}

inline void require_finite(const Eigen::Ref<const Vector>& v, const char* what) {
  if (!v.allFinite()) throw Error(std::string(what) + " contains non-finite entries");
}

inline void require_dim(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw Error(std::string("dimension mismatch in ") + what + ": got " + std::to_string(got) +
                ", expected " + std::to_string(want));
  }
}

}  // namespace compofed
