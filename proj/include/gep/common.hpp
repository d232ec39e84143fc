#ifndef GEP_COMMON_HPP
#define GEP_COMMON_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace gep {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Cholesky pivot failure; carries the index of the offending pivot.
struct NotPositiveDefinite : Error {
  int pivot_index;
  explicit NotPositiveDefinite(int pivot)
      : Error("matrix not positive definite at pivot " + std::to_string(pivot)),
        pivot_index(pivot) {}
};

struct NumericalDomain : Error {
  using Error::Error;
};

struct InvalidCorrelation : Error {
  using Error::Error;
};

struct InvalidPilots : Error {
  using Error::Error;
};

struct InvalidLength : Error {
  using Error::Error;
};

struct SizeTooLarge : Error {
  using Error::Error;
};

struct ArchiveError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace gep

#endif
