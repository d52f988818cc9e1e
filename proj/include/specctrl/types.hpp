#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace specctrl {

using cd = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using CRow = Eigen::RowVectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Structural problems with a model or its inputs (bad dimensions, ordering,
/// degenerate data).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Failures of a numerical kernel (non-Hurwitz shift, ill-conditioning,
/// overflow).
class NumericalError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline std::string dims(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

template <typename Derived>
std::string dims(const Eigen::MatrixBase<Derived>& m) {
  return dims(m.rows(), m.cols());
}

}  // namespace detail

}  // namespace specctrl
