#include <cmath>
#include <vector>

#include "doctest.h"
#include "gep/channel.hpp"
#include "gep/ep.hpp"
#include "gep/modem.hpp"
#include "gep/rng.hpp"

using namespace gep;

namespace {

std::vector<SymbolPdf> uniform_priors(int k, const Constellation& c) {
  return std::vector<SymbolPdf>(
      k, SymbolPdf::Constant(c.size(), 1.0 / c.size()));
}

// Scalar-channel reference: exact posterior over levels for y = h a + w.
SymbolPdf scalar_posterior(double h, double y, double sigma_w2,
                           const SymbolPdf& prior, const Constellation& c) {
  Vector lp(c.size());
  for (int i = 0; i < c.size(); ++i) {
    const double d = y - h * c.level(i);
    lp(i) = -d * d / (2.0 * sigma_w2) + std::log(prior(i));
  }
  return normalize_log_pdf(lp);
}

Matrix random_matrix(int n, int k, Rng& rng) {
  Matrix h(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) h(i, j) = rng.normal();
  return h;
}

}  // namespace

TEST_CASE("lmmse_step closed form for the identity channel") {
  // H = I, sigma_w2 = 1, lambda = 1, gamma = 0: Sigma = I/2, mu = y/2.
  const int k = 4;
  Vector y(k);
  y << 1.0, -2.0, 0.5, 3.0;
  const LmmseResult r = lmmse_step(Matrix::Identity(k, k), y, 1.0,
                                   Vector::Ones(k), Vector::Zero(k));
  CHECK((r.sigma - 0.5 * Matrix::Identity(k, k)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((r.mu - 0.5 * y).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("lmmse_step matches a dense solve on random instances") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 8, k = 8;
    const Matrix h = random_matrix(n, k, rng);
    Vector y(n), lambda(k), gamma(k);
    for (int i = 0; i < n; ++i) y(i) = rng.normal();
    for (int i = 0; i < k; ++i) {
      lambda(i) = 0.5 + rng.uniform();
      gamma(i) = rng.normal();
    }
    const double s2 = 0.3;
    const LmmseResult r = lmmse_step(h, y, s2, lambda, gamma);
    Matrix a = h.transpose() * h / s2;
    a.diagonal() += lambda;
    const Matrix sigma_ref = a.ldlt().solve(Matrix::Identity(k, k));
    const Vector mu_ref = a.ldlt().solve(h.transpose() * y / s2 + gamma);
    CHECK((r.sigma - sigma_ref).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((r.mu - mu_ref).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("lmmse_step rejects a non-positive noise variance") {
  CHECK_THROWS_AS(lmmse_step(Matrix::Identity(2, 2), Vector::Zero(2), 0.0,
                             Vector::Ones(2), Vector::Zero(2)),
                  NumericalDomain);
}

TEST_CASE("cavity with zero precision returns the joint marginals") {
  Rng rng(3);
  const Matrix h = random_matrix(4, 4, rng);
  Vector y(4);
  for (int i = 0; i < 4; ++i) y(i) = rng.normal();
  const Vector lambda = Vector::Constant(4, 1e-12);
  const LmmseResult post = lmmse_step(h, y, 0.5, lambda, Vector::Zero(4));
  const Cavity cav = cavity_marginals(post, Vector::Zero(4), Vector::Zero(4), 1e-8);
  for (int i = 0; i < 4; ++i) {
    CHECK(cav.variance(i) == doctest::Approx(post.sigma(i, i)).epsilon(1e-10));
    CHECK(cav.mean(i) == doctest::Approx(post.mu(i)).epsilon(1e-8));
  }
}

TEST_CASE("recombining the cavity with its site recovers the joint marginal") {
  // Gaussian product rule: 1/v_e + lambda = 1/Sigma_kk and
  // x_e/v_e + gamma = mu_k/Sigma_kk.
  Rng rng(4);
  const Matrix h = random_matrix(6, 6, rng);
  Vector y(6), lambda(6), gamma(6);
  for (int i = 0; i < 6; ++i) {
    y(i) = rng.normal();
    lambda(i) = 0.2 + rng.uniform();
    gamma(i) = rng.normal();
  }
  const LmmseResult post = lmmse_step(h, y, 0.4, lambda, gamma);
  const Cavity cav = cavity_marginals(post, lambda, gamma, 1e-12);
  for (int i = 0; i < 6; ++i) {
    CHECK(1.0 / cav.variance(i) + lambda(i) ==
          doctest::Approx(1.0 / post.sigma(i, i)).epsilon(1e-9));
    CHECK(cav.mean(i) / cav.variance(i) + gamma(i) ==
          doctest::Approx(post.mu(i) / post.sigma(i, i)).epsilon(1e-8));
  }
}

TEST_CASE("cavity variance is floored when a site dominates the marginal") {
  LmmseResult post;
  post.sigma = Matrix::Identity(1, 1);
  post.mu = Vector::Ones(1);
  // lambda * Sigma_kk = 1 exactly: the division denominator vanishes.
  const Cavity cav =
      cavity_marginals(post, Vector::Ones(1), Vector::Zero(1), 1e-8);
  CHECK(cav.variance(0) > 0.0);
  CHECK(std::isfinite(cav.mean(0)));
}

TEST_CASE("discrete posterior equals the normalized Gaussian-prior product") {
  const Constellation c = Constellation::from_qam_order(16);
  Cavity cav;
  cav.mean = Vector::Constant(1, 0.2);
  cav.variance = Vector::Constant(1, 0.3);
  SymbolPdf prior(4);
  prior << 0.1, 0.4, 0.3, 0.2;
  const std::vector<SymbolPdf> post = discrete_posteriors(cav, {prior}, c);
  Vector expect(4);
  for (int i = 0; i < 4; ++i) {
    const double d = c.level(i) - 0.2;
    expect(i) = std::exp(-d * d / (2.0 * 0.3)) * prior(i);
  }
  expect /= expect.sum();
  CHECK((post[0] - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("init_natural_params inverts the prior moments") {
  const Constellation c = Constellation::from_qam_order(16);
  Vector lambda, gamma;
  init_natural_params(uniform_priors(3, c), c, 1e-8, &lambda, &gamma);
  for (int i = 0; i < 3; ++i) {
    CHECK(lambda(i) == doctest::Approx(1.0 / c.average_energy()).epsilon(1e-12));
    CHECK(std::abs(gamma(i)) < 1e-12);
  }
  // A point-mass prior hits the variance floor.
  SymbolPdf point = SymbolPdf::Zero(4);
  point(3) = 1.0;
  init_natural_params({point}, c, 1e-8, &lambda, &gamma);
  CHECK(lambda(0) == doctest::Approx(1e8));
  CHECK(gamma(0) == doctest::Approx(c.level(3) * 1e8));
}

TEST_CASE("natural_update with full damping weight reproduces the moment match") {
  Cavity cav;
  cav.mean = Vector::Constant(1, 0.5);
  cav.variance = Vector::Constant(1, 2.0);
  Vector lambda = Vector::Constant(1, 7.0);
  Vector gamma = Vector::Constant(1, -3.0);
  const Vector post_mean = Vector::Constant(1, 0.25);
  const Vector post_var = Vector::Constant(1, 1.0);  // v_e/2
  natural_update(post_mean, post_var, cav, 1.0, 1e-12, &lambda, &gamma);
  // lambda_new = 1/1 - 1/2, gamma_new = 0.25/1 - 0.5/2.
  CHECK(lambda(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(gamma(0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("natural_update damps toward the new pair") {
  Cavity cav;
  cav.mean = Vector::Constant(1, 0.0);
  cav.variance = Vector::Constant(1, 2.0);
  Vector lambda = Vector::Constant(1, 1.0);
  Vector gamma = Vector::Constant(1, 0.0);
  const Vector post_mean = Vector::Constant(1, 0.0);
  const Vector post_var = Vector::Constant(1, 1.0);
  natural_update(post_mean, post_var, cav, 0.25, 1e-12, &lambda, &gamma);
  // New pair would be (0.5, 0); damping: 0.25*0.5 + 0.75*1.0.
  CHECK(lambda(0) == doctest::Approx(0.25 * 0.5 + 0.75 * 1.0).epsilon(1e-12));
}

TEST_CASE("natural_update keeps the old pair when precision would go negative") {
  Cavity cav;
  cav.mean = Vector::Constant(1, 0.1);
  cav.variance = Vector::Constant(1, 1.0);
  Vector lambda = Vector::Constant(1, 3.0);
  Vector gamma = Vector::Constant(1, 0.7);
  // Posterior variance above the cavity variance implies negative precision.
  natural_update(Vector::Constant(1, 0.0), Vector::Constant(1, 2.0), cav, 0.5,
                 1e-12, &lambda, &gamma);
  CHECK(lambda(0) == 3.0);
  CHECK(gamma(0) == 0.7);
}

TEST_CASE("zero damping weight is a fixed point") {
  Rng rng(5);
  const Constellation c = Constellation::from_qam_order(16);
  const ChannelModelSpec spec;
  Rng ch = rng.substream("ch");
  const Matrix h = generate_channel(spec, ch);
  std::vector<int> bits(16);
  for (int& b : bits) b = ch.bit();
  const Vector x = modulate(bits, c);
  const RealChannelInstance inst = apply_awgn(h, x, 15.0, 0.5, ch);
  EpConfig cfg;
  cfg.damping = 0.0;
  const EpResult r = ep_detect(inst.h, inst.y, inst.sigma_w2,
                               uniform_priors(8, c), c, cfg, true);
  REQUIRE(r.layers.size() == 5);
  for (size_t t = 1; t < r.layers.size(); ++t) {
    CHECK((r.layers[t].lambda_in - r.layers[0].lambda_in).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK((r.layers[t].gamma_in - r.layers[0].gamma_in).cwiseAbs().maxCoeff() ==
          0.0);
  }
}

TEST_CASE("the final layer consumes but does not refresh the site parameters") {
  Rng rng(6);
  const Constellation c = Constellation::from_qam_order(4);
  const ChannelModelSpec spec;
  Rng ch = rng.substream("ch");
  const Matrix h = generate_channel(spec, ch);
  std::vector<int> bits(8);
  for (int& b : bits) b = ch.bit();
  const Vector x = modulate(bits, c);
  const RealChannelInstance inst = apply_awgn(h, x, 10.0, 0.5, ch);
  EpConfig cfg;
  const EpResult a = ep_detect(inst.h, inst.y, inst.sigma_w2,
                               uniform_priors(8, c), c, cfg, true);
  // Rerunning with one extra layer: layer t reuses exactly the pair that
  // layer t produced, so prefix trajectories agree.
  EpConfig cfg6 = cfg;
  cfg6.n_layers = 6;
  const EpResult b = ep_detect(inst.h, inst.y, inst.sigma_w2,
                               uniform_priors(8, c), c, cfg6, true);
  for (int t = 0; t < 5; ++t) {
    CHECK((a.layers[t].lambda_in - b.layers[t].lambda_in).cwiseAbs().maxCoeff() ==
          0.0);
  }
  // The returned site pair equals the last layer's input: no update at T.
  CHECK((a.lambda - a.layers[4].lambda_in).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.gamma - a.layers[4].gamma_in).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single-antenna detection is exact for any layer count") {
  Rng rng(7);
  const Constellation c = Constellation::from_qam_order(16);
  for (int trial = 0; trial < 100; ++trial) {
    Rng tr = rng.substream("trial", trial);
    const double h = 0.5 + tr.uniform();
    const double x = c.level(static_cast<int>(tr.uniform_index(4)));
    const double s2 = 0.05 + 0.2 * tr.uniform();
    const double y = h * x + std::sqrt(s2) * tr.normal();
    SymbolPdf prior(4);
    for (int i = 0; i < 4; ++i) prior(i) = tr.uniform() + 0.1;
    prior /= prior.sum();
    const SymbolPdf ref = scalar_posterior(h, y, s2, prior, c);
    Matrix hm(1, 1);
    hm << h;
    Vector yv(1);
    yv << y;
    for (int layers : {1, 3, 5}) {
      EpConfig cfg;
      cfg.n_layers = layers;
      const EpResult r = ep_detect(hm, yv, s2, {prior}, c, cfg);
      CHECK((r.posteriors[0] - ref).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("near-noiseless detection recovers the transmitted levels") {
  Rng rng(8);
  const Constellation c = Constellation::from_qam_order(16);
  const ChannelModelSpec spec;
  for (int trial = 0; trial < 10; ++trial) {
    Rng tr = rng.substream("nl", trial);
    const Matrix h = generate_channel(spec, tr);
    std::vector<int> bits(16);
    for (int& b : bits) b = tr.bit();
    const Vector x = modulate(bits, c);
    const Vector y = h * x;
    const EpResult r =
        ep_detect(h, y, 1e-12, uniform_priors(8, c), c, EpConfig{});
    const std::vector<int> dec = hard_symbol_decisions(r.posteriors);
    for (int k = 0; k < 8; ++k) CHECK(c.level(dec[k]) == doctest::Approx(x(k)));
  }
}

TEST_CASE("iterated EP beats one-shot LMMSE on symbol errors") {
  Rng root(9);
  const Constellation c = Constellation::from_qam_order(16);
  const ChannelModelSpec spec;
  int ep_err = 0, lmmse_err = 0, n_sym = 0;
  for (int trial = 0; trial < 400; ++trial) {
    Rng tr = root.substream("cmp", trial);
    const Matrix h = generate_channel(spec, tr);
    std::vector<int> bits(16);
    for (int& b : bits) b = tr.bit();
    const Vector x = modulate(bits, c);
    const RealChannelInstance inst = apply_awgn(h, x, 16.0, 0.5, tr);
    const auto priors = uniform_priors(8, c);
    const EpResult ep =
        ep_detect(inst.h, inst.y, inst.sigma_w2, priors, c, EpConfig{});
    const auto lm = lmmse_soft_detect(inst.h, inst.y, inst.sigma_w2, priors, c);
    const auto de = hard_symbol_decisions(ep.posteriors);
    const auto dl = hard_symbol_decisions(lm);
    for (int k = 0; k < 8; ++k) {
      ++n_sym;
      ep_err += c.level(de[k]) != doctest::Approx(x(k));
      lmmse_err += c.level(dl[k]) != doctest::Approx(x(k));
    }
  }
  INFO("EP errors ", ep_err, " LMMSE errors ", lmmse_err, " of ", n_sym);
  CHECK(ep_err < lmmse_err);
}

TEST_CASE("map_posteriors matches the scalar posterior for one antenna") {
  Rng rng(10);
  const Constellation c = Constellation::from_qam_order(64);
  const double h = 1.3, s2 = 0.2;
  const double y = h * c.level(5) + 0.1;
  SymbolPdf prior(8);
  for (int i = 0; i < 8; ++i) prior(i) = rng.uniform() + 0.1;
  prior /= prior.sum();
  Matrix hm(1, 1);
  hm << h;
  Vector yv(1);
  yv << y;
  const auto post = map_posteriors(hm, yv, s2, {prior}, c);
  const SymbolPdf ref = scalar_posterior(h, y, s2, prior, c);
  CHECK((post[0] - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("map_posteriors marginals are consistent on a 2x2 system") {
  Rng rng(11);
  const Constellation c = Constellation::from_qam_order(4);
  const ChannelModelSpec spec2{ChannelKind::IidRayleigh, 2, 2, 0.0};
  const Matrix h = generate_channel(spec2, rng);
  std::vector<int> bits(4);
  for (int& b : bits) b = rng.bit();
  const Vector x = modulate(bits, c);
  const RealChannelInstance inst = apply_awgn(h, x, 8.0, 0.5, rng);
  const auto post =
      map_posteriors(inst.h, inst.y, inst.sigma_w2, uniform_priors(4, c), c);
  REQUIRE(post.size() == 4);
  for (const SymbolPdf& p : post) {
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(p.minCoeff() >= 0.0);
  }
  // Permuting antennas permutes the marginals.
  std::vector<int> perm{2, 0, 3, 1};
  Matrix hp(inst.h.rows(), 4);
  std::vector<SymbolPdf> priors_p;
  for (int j = 0; j < 4; ++j) {
    hp.col(j) = inst.h.col(perm[j]);
    priors_p.push_back(SymbolPdf::Constant(2, 0.5));
  }
  const auto post_p = map_posteriors(hp, inst.y, inst.sigma_w2, priors_p, c);
  for (int j = 0; j < 4; ++j) {
    CHECK((post_p[j] - post[perm[j]]).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("map_posteriors refuses oversized enumerations") {
  const Constellation c = Constellation::from_qam_order(64);
  const int k = 8;  // 8^8 = 2^24 hypotheses
  CHECK_THROWS_AS(map_posteriors(Matrix::Identity(k, k), Vector::Zero(k), 1.0,
                                 uniform_priors(k, c), c),
                  SizeTooLarge);
}

TEST_CASE("posterior_bit_llrs flattens antenna-major and respects the clip") {
  const Constellation c = Constellation::from_qam_order(16);
  SymbolPdf point = SymbolPdf::Zero(4);
  point(1) = 1.0;
  const std::vector<SymbolPdf> posts{SymbolPdf::Constant(4, 0.25), point};
  const Vector llrs = posterior_bit_llrs(posts, c, 12.0);
  REQUIRE(llrs.size() == 4);
  CHECK(llrs(0) == 0.0);
  CHECK(llrs(1) == 0.0);
  for (int b = 0; b < 2; ++b) {
    CHECK(std::abs(llrs(2 + b)) == doctest::Approx(12.0));
    CHECK((llrs(2 + b) > 0) == (c.label_bit(1, b) == 1));
  }
}

TEST_CASE("extrinsic_bit_llrs subtracts the prior and clips") {
  const Constellation c = Constellation::from_qam_order(4);
  Rng rng(12);
  // Build a prior, fold it into a posterior, and verify the subtraction.
  Vector prior_llrs(2);
  prior_llrs << 0.8, -0.3;
  std::vector<SymbolPdf> posts;
  for (int k = 0; k < 2; ++k) {
    posts.push_back(prior_pdf_from_llrs(prior_llrs.segment(k, 1), c));
  }
  const Vector ext = extrinsic_bit_llrs(posts, prior_llrs, c, 30.0);
  // Posterior equals prior here, so the extrinsic part vanishes.
  CHECK(ext.cwiseAbs().maxCoeff() < 1e-10);
  // Clipping engages when the posterior is a point mass.
  SymbolPdf point = SymbolPdf::Zero(2);
  point(1) = 1.0;
  const Vector ext2 =
      extrinsic_bit_llrs({point, point}, Vector::Zero(2), c, 5.0);
  CHECK(ext2(0) == doctest::Approx(5.0));
  CHECK(ext2(1) == doctest::Approx(5.0));
}
