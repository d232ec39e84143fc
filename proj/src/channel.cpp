#include "gep/channel.hpp"

#include <cmath>
#include <complex>
#include <limits>

#include "gep/numerics.hpp"

namespace gep {

Matrix exponential_correlation(int n, double rho) {
  if (rho < 0.0 || rho >= 1.0) {
    throw InvalidCorrelation("correlation coefficient must be in [0, 1)");
  }
  Matrix r(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      r(i, j) = std::pow(rho, std::abs(i - j));
    }
  }
  return r;
}

ComplexMatrix generate_complex_channel(const ChannelModelSpec& spec, Rng& rng) {
  const int nr = spec.n_rx;
  const int nt = spec.n_tx;
  if (nr < nt) throw Error("generate_complex_channel: need n_rx >= n_tx");
  // Per-real-dimension variance 1/N with N = 2 n_rx, so E|h|^2 = 1/n_rx.
  const double sd = 1.0 / std::sqrt(2.0 * nr);
  ComplexMatrix u(nr, nt);
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < nt; ++j) {
      u(i, j) = std::complex<double>(rng.normal(0.0, sd), rng.normal(0.0, sd));
    }
  }
  if (spec.kind == ChannelKind::IidRayleigh) return u;
  const Matrix rr = spd_sqrt(exponential_correlation(nr, spec.corr_coeff));
  const Matrix rt = spd_sqrt(exponential_correlation(nt, spec.corr_coeff));
  return rr.cast<std::complex<double>>() * u * rt.cast<std::complex<double>>();
}

Matrix complex_to_real_matrix(const ComplexMatrix& hc) {
  const Eigen::Index nr = hc.rows();
  const Eigen::Index nt = hc.cols();
  Matrix h(2 * nr, 2 * nt);
  h.topLeftCorner(nr, nt) = hc.real();
  h.topRightCorner(nr, nt) = -hc.imag();
  h.bottomLeftCorner(nr, nt) = hc.imag();
  h.bottomRightCorner(nr, nt) = hc.real();
  return h;
}

Vector complex_to_real_vector(const ComplexVector& v) {
  Vector out(2 * v.size());
  out.head(v.size()) = v.real();
  out.tail(v.size()) = v.imag();
  return out;
}

ComplexMatrix normalize_columns(const ComplexMatrix& hc) {
  ComplexMatrix out = hc;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const double norm = out.col(j).norm();
    if (norm > 0.0) out.col(j) /= norm;
  }
  return out;
}

Matrix generate_channel(const ChannelModelSpec& spec, Rng& rng) {
  return complex_to_real_matrix(
      normalize_columns(generate_complex_channel(spec, rng)));
}

double noise_variance_for_snr(int n, int k, double symbol_energy,
                              double snr_db) {
  if (std::isinf(snr_db)) return 0.0;
  const double snr = std::pow(10.0, snr_db / 10.0);
  return k * symbol_energy / (n * snr);
}

RealChannelInstance apply_awgn(const Matrix& h, const Vector& x,
                               double snr_db, double symbol_energy, Rng& rng) {
  RealChannelInstance inst;
  inst.h = h;
  inst.sigma_w2 =
      noise_variance_for_snr(static_cast<int>(h.rows()),
                             static_cast<int>(h.cols()), symbol_energy, snr_db);
  inst.y = h * x;
  if (inst.sigma_w2 > 0.0) {
    const double sd = std::sqrt(inst.sigma_w2);
    for (Eigen::Index i = 0; i < inst.y.size(); ++i) {
      inst.y(i) += rng.normal(0.0, sd);
    }
  }
  return inst;
}

ComplexMatrix dft_pilot_matrix(int n_tx, int n_pilots) {
  if (n_pilots < n_tx) throw InvalidPilots("need n_pilots >= n_tx");
  ComplexMatrix x(n_tx, n_pilots);
  for (int t = 0; t < n_tx; ++t) {
    for (int p = 0; p < n_pilots; ++p) {
      const double phase = -2.0 * M_PI * t * p / n_pilots;
      x(t, p) = std::complex<double>(std::cos(phase), std::sin(phase));
    }
  }
  return x;
}

ChannelEstimate lmmse_channel_estimate(const ComplexMatrix& observations,
                                       const ComplexMatrix& pilots,
                                       double sigma_w2,
                                       const ComplexMatrix& row_prior_cov) {
  const Eigen::Index nr = observations.rows();
  const Eigen::Index nt = pilots.rows();
  const Eigen::Index np = pilots.cols();
  if (observations.cols() != np) {
    throw InvalidPilots("observation/pilot length mismatch");
  }
  if (np < nt) throw InvalidPilots("need n_pilots >= n_tx");

  // Row model: y_i = A h_i + w_i with A = X^T.
  const ComplexMatrix a = pilots.transpose();
  const ComplexMatrix gram = a.adjoint() * a;
  {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(gram);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > hi * 1e-12)) throw InvalidPilots("singular pilot Gram matrix");
  }

  const double sigma_c2 = 2.0 * sigma_w2;  // per complex observation
  ChannelEstimate est;
  est.h.resize(nr, nt);
  if (sigma_c2 <= 0.0) {
    // Noiseless limit: least squares recovers the channel exactly.
    const ComplexMatrix pinv = gram.ldlt().solve(a.adjoint());
    for (Eigen::Index i = 0; i < nr; ++i) {
      est.h.row(i) = (pinv * observations.row(i).transpose()).transpose();
    }
    est.mse_per_coeff = 0.0;
    return est;
  }

  const ComplexMatrix prior_inv =
      row_prior_cov.ldlt().solve(ComplexMatrix::Identity(nt, nt));
  const ComplexMatrix info = prior_inv + gram / sigma_c2;
  const ComplexMatrix post_cov =
      info.ldlt().solve(ComplexMatrix::Identity(nt, nt));
  const ComplexMatrix filter = post_cov * a.adjoint() / sigma_c2;
  for (Eigen::Index i = 0; i < nr; ++i) {
    est.h.row(i) = (filter * observations.row(i).transpose()).transpose();
  }
  est.mse_per_coeff = post_cov.real().trace() / static_cast<double>(nt);
  return est;
}

}  // namespace gep
