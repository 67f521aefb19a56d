#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace overem {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// one observation per row
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

const char* version();

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateComponentError : Error {
  using Error::Error;
};

struct SingularFisherError : Error {
  using Error::Error;
};

struct QuadratureOverflowError : Error {
  using Error::Error;
};

struct SuspiciousMapError : Error {
  using Error::Error;
};

struct DegenerateDirectionError : Error {
  using Error::Error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace overem
