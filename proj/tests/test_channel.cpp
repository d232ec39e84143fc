#include <cmath>
#include <complex>
#include <limits>

#include "doctest.h"
#include "gep/channel.hpp"
#include "gep/rng.hpp"

using namespace gep;

namespace {

ChannelModelSpec iid_spec(int n_rx, int n_tx) {
  ChannelModelSpec s;
  s.kind = ChannelKind::IidRayleigh;
  s.n_rx = n_rx;
  s.n_tx = n_tx;
  return s;
}

ChannelModelSpec kron_spec(int n_rx, int n_tx, double rho) {
  ChannelModelSpec s;
  s.kind = ChannelKind::KroneckerCorrelated;
  s.n_rx = n_rx;
  s.n_tx = n_tx;
  s.corr_coeff = rho;
  return s;
}

}  // namespace

TEST_CASE("exponential correlation has entries rho^|i-j| and is SPD") {
  const Matrix r = exponential_correlation(4, 0.5);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      CHECK(r(i, j) == doctest::Approx(std::pow(0.5, std::abs(i - j))));
    }
  }
  const Eigen::SelfAdjointEigenSolver<Matrix> es(r);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("correlation coefficient outside [0,1) is rejected") {
  CHECK_THROWS_AS(exponential_correlation(4, 1.0), InvalidCorrelation);
  CHECK_THROWS_AS(exponential_correlation(4, -0.1), InvalidCorrelation);
  Rng rng(1);
  CHECK_THROWS_AS(generate_complex_channel(kron_spec(4, 4, 1.2), rng),
                  InvalidCorrelation);
}

TEST_CASE("zero correlation degenerates to the iid draw") {
  Rng a(33), b(33);
  const ComplexMatrix hi = generate_complex_channel(iid_spec(4, 4), a);
  const ComplexMatrix hk = generate_complex_channel(kron_spec(4, 4, 0.0), b);
  CHECK((hi - hk).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("raw complex entries have variance 1/n_rx") {
  Rng rng(5);
  const int n_rx = 4, n_tx = 4, trials = 4000;
  double sum_sq = 0.0;
  for (int t = 0; t < trials; ++t) {
    const ComplexMatrix h = generate_complex_channel(iid_spec(n_rx, n_tx), rng);
    sum_sq += h.cwiseAbs2().sum();
  }
  const double mean_sq = sum_sq / (trials * n_rx * n_tx);
  CHECK(mean_sq == doctest::Approx(1.0 / n_rx).epsilon(0.02));
}

TEST_CASE("correlated draws show the requested transmit correlation") {
  Rng rng(6);
  const double rho = 0.7;
  const int trials = 20000;
  std::complex<double> acc(0.0, 0.0);
  double norm0 = 0.0, norm1 = 0.0;
  for (int t = 0; t < trials; ++t) {
    const ComplexMatrix h = generate_complex_channel(kron_spec(2, 2, rho), rng);
    acc += h(0, 0) * std::conj(h(0, 1));
    norm0 += std::norm(h(0, 0));
    norm1 += std::norm(h(0, 1));
  }
  const double corr = std::abs(acc) / std::sqrt(norm0 * norm1);
  CHECK(corr == doctest::Approx(rho).epsilon(0.05));
}

TEST_CASE("normalize_columns yields unit complex column norms and is idempotent") {
  Rng rng(9);
  const ComplexMatrix h = generate_complex_channel(iid_spec(6, 4), rng);
  const ComplexMatrix n1 = normalize_columns(h);
  for (int c = 0; c < 4; ++c) {
    CHECK(n1.col(c).norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
  const ComplexMatrix n2 = normalize_columns(n1);
  CHECK((n2 - n1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("real expansion reproduces complex multiplication") {
  Rng rng(10);
  const ComplexMatrix hc = generate_complex_channel(iid_spec(4, 4), rng);
  ComplexVector xc(4);
  for (int i = 0; i < 4; ++i) xc(i) = {rng.normal(), rng.normal()};
  const ComplexVector yc = hc * xc;
  const Matrix h = complex_to_real_matrix(hc);
  REQUIRE(h.rows() == 8);
  REQUIRE(h.cols() == 8);
  // Real input layout is [Re x; Im x]; output stacks the same way.
  Vector x(8);
  for (int i = 0; i < 4; ++i) {
    x(i) = xc(i).real();
    x(i + 4) = xc(i).imag();
  }
  const Vector y = h * x;
  CHECK((y - complex_to_real_vector(yc)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("real expansion of a scalar matches (a+bi)(c+di)") {
  ComplexMatrix hc(1, 1);
  hc(0, 0) = {2.0, -3.0};
  ComplexVector xc(1);
  xc(0) = {0.5, 1.5};
  const Vector y = complex_to_real_matrix(hc) * complex_to_real_vector(xc);
  const std::complex<double> prod = hc(0, 0) * xc(0);
  CHECK(y(0) == doctest::Approx(prod.real()));
  CHECK(y(1) == doctest::Approx(prod.imag()));
}

TEST_CASE("generate_channel gives the block structure with unit-norm pairs") {
  Rng rng(11);
  const Matrix h = generate_channel(iid_spec(4, 4), rng);
  REQUIRE(h.rows() == 8);
  REQUIRE(h.cols() == 8);
  // Block form [Re -Im; Im Re]: column k and column k+n_tx have equal norm 1.
  for (int c = 0; c < 8; ++c) CHECK(h.col(c).norm() == doctest::Approx(1.0).epsilon(1e-12));
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      CHECK(h(i, j) == doctest::Approx(h(i + 4, j + 4)));
      CHECK(h(i, j + 4) == doctest::Approx(-h(i + 4, j)));
    }
  }
}

TEST_CASE("noise variance calibration follows K Es / (N snr)") {
  // SNR 0 dB, K = Es = N contributions cancel as specified.
  CHECK(noise_variance_for_snr(8, 8, 0.5, 0.0) == doctest::Approx(0.5));
  CHECK(noise_variance_for_snr(8, 8, 0.5, 10.0) == doctest::Approx(0.05));
  CHECK(noise_variance_for_snr(16, 8, 0.5, 0.0) == doctest::Approx(0.25));
}

TEST_CASE("apply_awgn at infinite SNR returns the exact product") {
  Rng rng(13);
  const Matrix h = generate_channel(iid_spec(4, 4), rng);
  Vector x(8);
  for (int i = 0; i < 8; ++i) x(i) = rng.normal();
  const double inf = std::numeric_limits<double>::infinity();
  const RealChannelInstance inst = apply_awgn(h, x, inf, 0.5, rng);
  CHECK(inst.sigma_w2 == 0.0);
  CHECK((inst.y - h * x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("apply_awgn noise power matches the requested SNR") {
  Rng rng(14);
  const Matrix h = generate_channel(iid_spec(4, 4), rng);
  Vector x = Vector::Zero(8);  // pure noise observation
  const double snr_db = 7.0;
  const int trials = 200000;
  double acc = 0.0;
  for (int t = 0; t < trials; ++t) {
    const RealChannelInstance inst = apply_awgn(h, x, snr_db, 0.5, rng);
    acc += inst.y.squaredNorm();
  }
  const double per_dim = acc / (trials * 8.0);
  const double expect = noise_variance_for_snr(8, 8, 0.5, snr_db);
  CHECK(per_dim == doctest::Approx(expect).epsilon(0.01));
}

TEST_CASE("dft pilot rows are orthogonal with squared norm n_pilots") {
  const ComplexMatrix p = dft_pilot_matrix(2, 16);
  REQUIRE(p.rows() == 2);
  REQUIRE(p.cols() == 16);
  const ComplexMatrix gram = p * p.adjoint();
  CHECK(std::abs(gram(0, 0) - 16.0) < 1e-10);
  CHECK(std::abs(gram(1, 1) - 16.0) < 1e-10);
  CHECK(std::abs(gram(0, 1)) < 1e-10);
}

TEST_CASE("too few pilots are rejected") {
  CHECK_THROWS_AS(dft_pilot_matrix(4, 3), InvalidPilots);
}

TEST_CASE("noiseless pilots recover the channel exactly") {
  Rng rng(15);
  const ComplexMatrix hc = generate_complex_channel(iid_spec(4, 2), rng);
  const ComplexMatrix pilots = dft_pilot_matrix(2, 8);
  const ComplexMatrix obs = hc * pilots;
  const ComplexMatrix prior = ComplexMatrix::Identity(2, 2) * 0.25;
  const ChannelEstimate est = lmmse_channel_estimate(obs, pilots, 0.0, prior);
  CHECK((est.h - hc).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(est.mse_per_coeff < 1e-12);
}

TEST_CASE("estimator MSE matches its closed-form prediction") {
  Rng rng(16);
  const int n_rx = 2, n_tx = 2, n_p = 8, trials = 10000;
  const ComplexMatrix pilots = dft_pilot_matrix(n_tx, n_p);
  const ComplexMatrix prior = ComplexMatrix::Identity(n_tx, n_tx) / n_rx;
  const double sigma_w2 = 0.1;  // per real dimension -> 2 sigma_w2 per entry
  double se = 0.0;
  double predicted = 0.0;
  const double sd = std::sqrt(sigma_w2);
  for (int t = 0; t < trials; ++t) {
    const ComplexMatrix hc = generate_complex_channel(iid_spec(n_rx, n_tx), rng);
    ComplexMatrix obs = hc * pilots;
    for (int r = 0; r < n_rx; ++r) {
      for (int c = 0; c < n_p; ++c) {
        obs(r, c) += std::complex<double>(sd * rng.normal(), sd * rng.normal());
      }
    }
    const ChannelEstimate est = lmmse_channel_estimate(obs, pilots, sigma_w2, prior);
    se += (est.h - hc).cwiseAbs2().sum() / (n_rx * n_tx);
    predicted = est.mse_per_coeff;
  }
  CHECK(se / trials == doctest::Approx(predicted).epsilon(0.02));
}

TEST_CASE("estimate improves with pilot count") {
  Rng rng(17);
  const ComplexMatrix prior = ComplexMatrix::Identity(2, 2) * 0.5;
  ComplexMatrix obs4 = dft_pilot_matrix(2, 4);
  ComplexMatrix obs32 = dft_pilot_matrix(2, 32);
  const double mse4 =
      lmmse_channel_estimate(ComplexMatrix::Zero(2, 4), obs4, 0.2, prior)
          .mse_per_coeff;
  const double mse32 =
      lmmse_channel_estimate(ComplexMatrix::Zero(2, 32), obs32, 0.2, prior)
          .mse_per_coeff;
  CHECK(mse32 < mse4);
}
