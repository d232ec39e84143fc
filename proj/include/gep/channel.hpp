#ifndef GEP_CHANNEL_HPP
#define GEP_CHANNEL_HPP

#include "gep/common.hpp"
#include "gep/rng.hpp"

namespace gep {

enum class ChannelKind { IidRayleigh, KroneckerCorrelated };

struct ChannelModelSpec {
  ChannelKind kind = ChannelKind::IidRayleigh;
  int n_rx = 4;
  int n_tx = 4;
  double corr_coeff = 0.0;  // Kronecker only, in [0, 1)
};

/// One transmission in the real-valued model y = H x + w with
/// N = 2 n_rx rows and K = 2 n_tx columns; H columns are unit-norm.
struct RealChannelInstance {
  Matrix h;
  Vector y;
  double sigma_w2 = 0.0;

  int rows() const { return static_cast<int>(h.rows()); }
  int cols() const { return static_cast<int>(h.cols()); }
};

/// Complex channel draw, before normalization.  Iid entries are CN(0, 1/n_rx);
/// the correlated case applies the Kronecker square roots with exponential
/// correlation profile rho^|i-j| on both sides.
ComplexMatrix generate_complex_channel(const ChannelModelSpec& spec, Rng& rng);

/// Exponential correlation matrix with entries rho^|i-j|.
Matrix exponential_correlation(int n, double rho);

/// Real block expansion [Re -Im; Im Re] of a complex matrix.
Matrix complex_to_real_matrix(const ComplexMatrix& hc);

/// Stacked [Re; Im] expansion of a complex vector.
Vector complex_to_real_vector(const ComplexVector& v);

/// Scale each column to unit Euclidean norm (complex-domain, so the real
/// expansion keeps its block structure).  Idempotent.
ComplexMatrix normalize_columns(const ComplexMatrix& hc);

/// Draw a channel, convert to the real model, and normalize columns.
Matrix generate_channel(const ChannelModelSpec& spec, Rng& rng);

/// Noise variance (per real dimension) for a target SNR given unit-norm
/// columns and symbol energy es: SNR = E[|Hx|^2] / E[|w|^2] = K es / (N s2).
double noise_variance_for_snr(int n, int k, double symbol_energy,
                              double snr_db);

/// y = H x + w with w calibrated to the SNR definition above.  An infinite
/// snr_db disables the noise entirely (sigma_w2 = 0 in the result).
RealChannelInstance apply_awgn(const Matrix& h, const Vector& x,
                               double snr_db, double symbol_energy, Rng& rng);

/// Pilot-based LMMSE channel estimation.
///
/// Observations Y = Hc X + W, with pilot block X (n_tx x n_pilots), noise
/// variance per complex entry 2*sigma_w2 (sigma_w2 per real dimension), and a
/// per-row prior covariance for the rows of Hc.
struct ChannelEstimate {
  ComplexMatrix h;
  double mse_per_coeff;  // closed-form LMMSE error variance, averaged
};

ChannelEstimate lmmse_channel_estimate(const ComplexMatrix& observations,
                                       const ComplexMatrix& pilots,
                                       double sigma_w2,
                                       const ComplexMatrix& row_prior_cov);

/// Pilot block made of the first n_tx rows of an n_pilots-point DFT matrix;
/// rows are mutually orthogonal with squared norm n_pilots.
ComplexMatrix dft_pilot_matrix(int n_tx, int n_pilots);

}  // namespace gep

#endif
