#include "gep/numerics.hpp"

#include <cmath>

namespace gep {

Matrix cholesky_factor(const Matrix& a) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n) throw Error("cholesky_factor: matrix must be square");
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double diag = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(diag > 0.0) || !std::isfinite(diag)) {
      throw NotPositiveDefinite(static_cast<int>(j));
    }
    diag = std::sqrt(diag);
    l(j, j) = diag;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      l(i, j) =
          (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / diag;
    }
  }
  return l;
}

Matrix spd_inverse(const Matrix& a) {
  const Matrix l = cholesky_factor(a);
  const Eigen::Index n = a.rows();
  Matrix inv = l.triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));
  inv = l.transpose().triangularView<Eigen::Upper>().solve(inv);
  // Symmetrize away the last bits of factorization asymmetry.
  return 0.5 * (inv + inv.transpose());
}

Vector spd_solve(const Matrix& a, const Vector& b) {
  const Matrix l = cholesky_factor(a);
  Vector y = l.triangularView<Eigen::Lower>().solve(b);
  return l.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix spd_sqrt(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  if (es.info() != Eigen::Success) {
    throw Error("spd_sqrt: eigendecomposition failed");
  }
  if (es.eigenvalues().minCoeff() < 0.0) {
    throw NotPositiveDefinite(0);
  }
  return es.eigenvectors() *
         es.eigenvalues().cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

QuadratureRule gauss_hermite_rule(int n) {
  if (n < 1) throw Error("gauss_hermite_rule: need at least one node");
  // Golub-Welsch: eigenvalues of the Jacobi matrix for Hermite polynomials.
  Matrix jacobi = Matrix::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double off = std::sqrt(i / 2.0);
    jacobi(i, i - 1) = off;
    jacobi(i - 1, i) = off;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(jacobi);
  QuadratureRule rule;
  rule.nodes = es.eigenvalues();
  rule.weights.resize(n);
  const double sqrt_pi = std::sqrt(M_PI);
  for (int i = 0; i < n; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    rule.weights(i) = sqrt_pi * v0 * v0;
  }
  return rule;
}

double gauss_hermite_expect(const std::function<double(double)>& f, double mean,
                            double variance, int nodes) {
  if (!(variance > 0.0)) {
    throw NumericalDomain("gauss_hermite_expect: variance must be positive");
  }
  const QuadratureRule rule = gauss_hermite_rule(nodes);
  const double scale = std::sqrt(2.0 * variance);
  double acc = 0.0;
  for (int i = 0; i < nodes; ++i) {
    const double value = f(mean + scale * rule.nodes(i));
    if (!std::isfinite(value)) {
      throw NumericalDomain("gauss_hermite_expect: non-finite integrand");
    }
    acc += rule.weights(i) * value;
  }
  return acc / std::sqrt(M_PI);
}

}  // namespace gep
