#ifndef GEP_NUMERICS_HPP
#define GEP_NUMERICS_HPP

#include <functional>

#include "gep/common.hpp"

namespace gep {

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
/// Throws NotPositiveDefinite with the failing pivot index otherwise.
Matrix cholesky_factor(const Matrix& a);

/// Inverse of a symmetric positive definite matrix via its Cholesky factor.
Matrix spd_inverse(const Matrix& a);

/// Solve A x = b for SPD A using the Cholesky factor.
Vector spd_solve(const Matrix& a, const Vector& b);

/// Symmetric square root of an SPD matrix (eigendecomposition route).
Matrix spd_sqrt(const Matrix& a);

/// Gauss-Hermite rule: nodes/weights for integrals against exp(-x^2).
struct QuadratureRule {
  Vector nodes;
  Vector weights;
};

QuadratureRule gauss_hermite_rule(int n);

/// E[f(L)] for L ~ N(mean, variance), computed with an n-node rule.
/// Throws NumericalDomain if f returns a non-finite value at any node.
double gauss_hermite_expect(const std::function<double(double)>& f, double mean,
                            double variance, int nodes = 64);

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  const double ax = x < 0.0 ? -x : x;
  return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-ax));
}

/// log(exp(a) + exp(b)) without overflow (max-star).
inline double log_sum_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace gep

#endif
