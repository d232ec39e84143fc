#include "gep/ep.hpp"

#include <cmath>
#include <limits>

#include "gep/numerics.hpp"

namespace gep {

LmmseResult lmmse_step(const Matrix& h, const Vector& y, double sigma_w2,
                       const Vector& lambda, const Vector& gamma) {
  if (!(sigma_w2 > 0.0)) {
    throw NumericalDomain("lmmse_step: noise variance must be positive");
  }
  const double inv_w = 1.0 / sigma_w2;
  Matrix precision = inv_w * (h.transpose() * h);
  precision.diagonal() += lambda;
  LmmseResult r;
  r.sigma = spd_inverse(precision);
  r.mu = r.sigma * (inv_w * (h.transpose() * y) + gamma);
  return r;
}

Cavity cavity_marginals(const LmmseResult& post, const Vector& lambda,
                        const Vector& gamma, double variance_floor) {
  const Eigen::Index k = lambda.size();
  Cavity c;
  c.mean.resize(k);
  c.variance.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double s = post.sigma(i, i);
    const double denom = std::max(1.0 - s * lambda(i), variance_floor);
    // Floor the variance alone; the mean keeps the raw ratio so that a
    // floored variance cannot rescale it.
    c.variance(i) = std::max(s / denom, variance_floor);
    c.mean(i) = (post.mu(i) - s * gamma(i)) / denom;
  }
  return c;
}

std::vector<SymbolPdf> discrete_posteriors(const Cavity& cavity,
                                           const std::vector<SymbolPdf>& priors,
                                           const Constellation& c) {
  const size_t k = priors.size();
  std::vector<SymbolPdf> out(k);
  for (size_t i = 0; i < k; ++i) {
    Vector log_p =
        gaussian_log_pdf_on_levels(cavity.mean(i), cavity.variance(i), c);
    log_p += priors[i].array().max(1e-300).log().matrix();
    out[i] = normalize_log_pdf(log_p);
  }
  return out;
}

void natural_update(const Vector& post_mean, const Vector& post_var,
                    const Cavity& cavity, double damping,
                    double variance_floor, Vector* lambda, Vector* gamma) {
  for (Eigen::Index i = 0; i < lambda->size(); ++i) {
    const double v = std::max(post_var(i), variance_floor);
    const double lam_new = 1.0 / v - 1.0 / cavity.variance(i);
    if (!(lam_new > 0.0) || !std::isfinite(lam_new)) continue;
    const double gam_new =
        post_mean(i) / v - cavity.mean(i) / cavity.variance(i);
    (*lambda)(i) = damping * lam_new + (1.0 - damping) * (*lambda)(i);
    (*gamma)(i) = damping * gam_new + (1.0 - damping) * (*gamma)(i);
  }
}

void init_natural_params(const std::vector<SymbolPdf>& priors,
                         const Constellation& c, double variance_floor,
                         Vector* lambda, Vector* gamma) {
  const Eigen::Index k = static_cast<Eigen::Index>(priors.size());
  lambda->resize(k);
  gamma->resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Moments m = prior_moments(priors[i], c);
    const double v = std::max(m.variance, variance_floor);
    (*lambda)(i) = 1.0 / v;
    (*gamma)(i) = m.mean / v;
  }
}

EpResult ep_detect(const Matrix& h, const Vector& y, double sigma_w2,
                   const std::vector<SymbolPdf>& priors, const Constellation& c,
                   const EpConfig& cfg, bool capture_layers) {
  const Eigen::Index k = h.cols();
  if (static_cast<Eigen::Index>(priors.size()) != k) {
    throw InvalidLength("ep_detect: one prior pmf per antenna required");
  }
  EpResult res;
  init_natural_params(priors, c, cfg.variance_floor, &res.lambda, &res.gamma);

  for (int t = 0; t < cfg.n_layers; ++t) {
    const LmmseResult post =
        lmmse_step(h, y, sigma_w2, res.lambda, res.gamma);
    const Cavity cav =
        cavity_marginals(post, res.lambda, res.gamma, cfg.variance_floor);
    res.posteriors = discrete_posteriors(cav, priors, c);
    if (capture_layers) {
      EpLayer layer;
      layer.sigma = post.sigma;
      layer.mu = post.mu;
      layer.cavity_mean = cav.mean;
      layer.cavity_var = cav.variance;
      layer.lambda_in = res.lambda;
      layer.gamma_in = res.gamma;
      res.layers.push_back(std::move(layer));
    }
    const bool last = t + 1 == cfg.n_layers;
    if (last && !cfg.update_last_layer) break;
    Vector mean(k), var(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      const Moments m = prior_moments(res.posteriors[i], c);
      mean(i) = m.mean;
      var(i) = m.variance;
    }
    natural_update(mean, var, cav, cfg.damping, cfg.variance_floor,
                   &res.lambda, &res.gamma);
  }
  return res;
}

std::vector<SymbolPdf> lmmse_soft_detect(const Matrix& h, const Vector& y,
                                         double sigma_w2,
                                         const std::vector<SymbolPdf>& priors,
                                         const Constellation& c,
                                         double variance_floor) {
  Vector lambda, gamma;
  init_natural_params(priors, c, variance_floor, &lambda, &gamma);
  const LmmseResult post = lmmse_step(h, y, sigma_w2, lambda, gamma);
  const Cavity cav = cavity_marginals(post, lambda, gamma, variance_floor);
  return discrete_posteriors(cav, priors, c);
}

std::vector<SymbolPdf> map_posteriors(const Matrix& h, const Vector& y,
                                      double sigma_w2,
                                      const std::vector<SymbolPdf>& priors,
                                      const Constellation& c) {
  const int k = static_cast<int>(h.cols());
  const int m = c.size();
  double hypotheses = 1.0;
  for (int i = 0; i < k; ++i) {
    hypotheses *= m;
    if (hypotheses > static_cast<double>(1 << 20)) {
      throw SizeTooLarge("map_posteriors: joint enumeration too large");
    }
  }
  if (!(sigma_w2 > 0.0)) {
    throw NumericalDomain("map_posteriors: noise variance must be positive");
  }

  Matrix log_marg = Matrix::Constant(
      m, k, -std::numeric_limits<double>::infinity());
  std::vector<int> idx(k, 0);
  std::vector<Vector> partial(k + 1);
  std::vector<double> log_prior_sum(k + 1, 0.0);
  partial[0] = Vector::Zero(h.rows());

  int depth = 0;
  while (true) {
    if (depth == k) {
      const double log_joint =
          -(y - partial[k]).squaredNorm() / (2.0 * sigma_w2) +
          log_prior_sum[k];
      for (int i = 0; i < k; ++i) {
        log_marg(idx[i], i) = log_sum_exp(log_marg(idx[i], i), log_joint);
      }
      --depth;
      while (depth >= 0 && ++idx[depth] == m) {
        idx[depth] = 0;
        --depth;
      }
      if (depth < 0) break;
    }
    partial[depth + 1] = partial[depth] + h.col(depth) * c.level(idx[depth]);
    log_prior_sum[depth + 1] =
        log_prior_sum[depth] + std::log(std::max(priors[depth](idx[depth]),
                                                 1e-300));
    ++depth;
  }

  std::vector<SymbolPdf> out(k);
  for (int i = 0; i < k; ++i) out[i] = normalize_log_pdf(log_marg.col(i));
  return out;
}

Vector posterior_bit_llrs(const std::vector<SymbolPdf>& posteriors,
                          const Constellation& c, double clip) {
  const int q = c.bits_per_symbol();
  Vector llrs(static_cast<Eigen::Index>(posteriors.size()) * q);
  for (size_t k = 0; k < posteriors.size(); ++k) {
    llrs.segment(static_cast<Eigen::Index>(k) * q, q) =
        pdf_to_extrinsic_llrs(posteriors[k], c, clip);
  }
  return llrs;
}

Vector extrinsic_bit_llrs(const std::vector<SymbolPdf>& posteriors,
                          const Vector& prior_llrs, const Constellation& c,
                          double clip) {
  // The difference must be formed before any clamping: a bounded APP minus a
  // prior beyond that bound would flip the extrinsic sign.
  Vector app = posterior_bit_llrs(posteriors, c,
                                  std::numeric_limits<double>::infinity());
  if (prior_llrs.size() != app.size()) {
    throw InvalidLength("extrinsic_bit_llrs: prior length mismatch");
  }
  Vector ext = app - prior_llrs;
  for (Eigen::Index i = 0; i < ext.size(); ++i) {
    ext(i) = std::clamp(ext(i), -clip, clip);
    if (std::isnan(ext(i))) ext(i) = 0.0;
  }
  return ext;
}

std::vector<int> hard_symbol_decisions(
    const std::vector<SymbolPdf>& posteriors) {
  std::vector<int> out(posteriors.size());
  for (size_t k = 0; k < posteriors.size(); ++k) {
    Eigen::Index best = 0;
    posteriors[k].maxCoeff(&best);
    out[k] = static_cast<int>(best);
  }
  return out;
}

}  // namespace gep
