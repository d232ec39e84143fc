#pragma once

#include <vector>

#include "gep/common.hpp"
#include "gep/modem.hpp"

namespace gep {

struct EpConfig {
  int n_layers = 5;
  double damping = 0.2;          // weight on the newly computed pair
  double variance_floor = 1e-8;
  double llr_clip = kDefaultLlrClip;
  bool update_last_layer = false;
};

struct LmmseResult {
  Matrix sigma;  // posterior covariance
  Vector mu;     // posterior mean
};

// sigma = (H'H/sigma_w2 + diag(lambda))^-1, mu = sigma (H'y/sigma_w2 + gamma).
LmmseResult lmmse_step(const Matrix& h, const Vector& y, double sigma_w2,
                       const Vector& lambda, const Vector& gamma);

struct Cavity {
  Vector mean;
  Vector variance;
};

// Removes each antenna's own factor from the joint Gaussian; the division
// denominator and the resulting variance are both floored.
Cavity cavity_marginals(const LmmseResult& post, const Vector& lambda,
                        const Vector& gamma, double variance_floor);

// Per-antenna discrete posterior: cavity Gaussian evaluated on the levels,
// weighted by the prior pmf.
std::vector<SymbolPdf> discrete_posteriors(const Cavity& cavity,
                                           const std::vector<SymbolPdf>& priors,
                                           const Constellation& c);

// Moment-matched natural-parameter update with damping.  Components whose new
// precision would be non-positive keep their previous (lambda, gamma) pair.
void natural_update(const Vector& post_mean, const Vector& post_var,
                    const Cavity& cavity, double damping,
                    double variance_floor, Vector* lambda, Vector* gamma);

// Initial pair from the prior moments: lambda = 1/var, gamma = mean/var.
void init_natural_params(const std::vector<SymbolPdf>& priors,
                         const Constellation& c, double variance_floor,
                         Vector* lambda, Vector* gamma);

struct EpLayer {
  Matrix sigma;
  Vector mu;
  Vector cavity_mean;
  Vector cavity_var;
  Vector lambda_in;  // parameters the layer's LMMSE step consumed
  Vector gamma_in;
};

struct EpResult {
  std::vector<SymbolPdf> posteriors;  // final per-antenna pmfs
  Vector lambda;
  Vector gamma;
  std::vector<EpLayer> layers;  // filled only when capture_layers is set
};

EpResult ep_detect(const Matrix& h, const Vector& y, double sigma_w2,
                   const std::vector<SymbolPdf>& priors, const Constellation& c,
                   const EpConfig& cfg, bool capture_layers = false);

// One-shot LMMSE with Gaussian per-antenna marginals; cheap reference
// detector.
std::vector<SymbolPdf> lmmse_soft_detect(const Matrix& h, const Vector& y,
                                         double sigma_w2,
                                         const std::vector<SymbolPdf>& priors,
                                         const Constellation& c,
                                         double variance_floor = 1e-8);

// Exhaustive joint enumeration; exact marginal posteriors.  Throws
// SizeTooLarge beyond 2^20 hypotheses.
std::vector<SymbolPdf> map_posteriors(const Matrix& h, const Vector& y,
                                      double sigma_w2,
                                      const std::vector<SymbolPdf>& priors,
                                      const Constellation& c);

// Stacked per-bit LLRs, antenna-major (antenna k occupies [k*Q, (k+1)*Q)).
Vector posterior_bit_llrs(const std::vector<SymbolPdf>& posteriors,
                          const Constellation& c,
                          double clip = kDefaultLlrClip);
// Posterior minus prior, clipped: the extrinsic output of a soft detector.
Vector extrinsic_bit_llrs(const std::vector<SymbolPdf>& posteriors,
                          const Vector& prior_llrs, const Constellation& c,
                          double clip = kDefaultLlrClip);

std::vector<int> hard_symbol_decisions(const std::vector<SymbolPdf>& posteriors);

}  // namespace gep
