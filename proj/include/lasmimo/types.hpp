#ifndef LASMIMO_TYPES_HPP
#define LASMIMO_TYPES_HPP

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace lasmimo {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using RealMatrix = Matrix<double>;
using RealVector = Vector<double>;
using ComplexMatrix = Matrix<std::complex<double>>;
using ComplexVector = Vector<std::complex<double>>;

// Thrown on shape mismatches and out-of-range arguments.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when an algorithm detects a broken internal invariant.
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace lasmimo

#endif  // LASMIMO_TYPES_HPP
