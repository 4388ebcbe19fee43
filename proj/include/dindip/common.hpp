#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace dindip {

using Index = Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent sizes between operators, parameters and signals.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-supplied configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, blow-up, stalled line search.
class NumericalError : public Error {
 public:
  using Error::Error;
};

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

/// Loss value and gradient of an objective at one parameter vector.
template <typename Scalar>
struct Evaluation {
  Scalar loss{};
  VectorX<Scalar> grad;
};

}  // namespace dindip
