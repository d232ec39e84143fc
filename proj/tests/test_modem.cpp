#include <cmath>
#include <vector>

#include "doctest.h"
#include "gep/modem.hpp"
#include "gep/rng.hpp"

using namespace gep;

TEST_CASE("QPSK real component is antipodal with energy 1/2") {
  const Constellation c = Constellation::from_qam_order(4);
  REQUIRE(c.size() == 2);
  CHECK(c.bits_per_symbol() == 1);
  CHECK(c.level(0) == doctest::Approx(-1.0 / std::sqrt(2.0)));
  CHECK(c.level(1) == doctest::Approx(+1.0 / std::sqrt(2.0)));
  CHECK(c.average_energy() == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("16-QAM real component has levels {-3,-1,1,3}/sqrt(10)") {
  const Constellation c = Constellation::from_qam_order(16);
  REQUIRE(c.size() == 4);
  CHECK(c.bits_per_symbol() == 2);
  const double s = 1.0 / std::sqrt(10.0);
  CHECK(c.level(0) == doctest::Approx(-3.0 * s));
  CHECK(c.level(1) == doctest::Approx(-1.0 * s));
  CHECK(c.level(2) == doctest::Approx(+1.0 * s));
  CHECK(c.level(3) == doctest::Approx(+3.0 * s));
  // Real-part energy is half the unit energy of the complex alphabet.
  CHECK(c.average_energy() == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("levels are symmetric and ascending for 64-QAM") {
  const Constellation c = Constellation::from_qam_order(64);
  REQUIRE(c.size() == 8);
  for (int i = 0; i + 1 < c.size(); ++i) CHECK(c.level(i) < c.level(i + 1));
  for (int i = 0; i < c.size(); ++i) {
    CHECK(c.level(i) == doctest::Approx(-c.level(c.size() - 1 - i)));
  }
  CHECK(c.average_energy() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("labels form a Gray code over adjacent levels") {
  for (int m : {16, 64}) {
    const Constellation c = Constellation::from_qam_order(m);
    const int q = c.bits_per_symbol();
    for (int i = 0; i + 1 < c.size(); ++i) {
      int diff = 0;
      for (int b = 0; b < q; ++b) diff += c.label_bit(i, b) != c.label_bit(i + 1, b);
      CHECK(diff == 1);
    }
  }
}

TEST_CASE("index_of_bits inverts label_bit") {
  const Constellation c = Constellation::from_qam_order(64);
  const int q = c.bits_per_symbol();
  for (int i = 0; i < c.size(); ++i) {
    std::vector<int> bits(q);
    for (int b = 0; b < q; ++b) bits[b] = c.label_bit(i, b);
    CHECK(c.index_of_bits(bits) == i);
  }
}

TEST_CASE("modulate then hard demodulate is the identity") {
  const Constellation c = Constellation::from_qam_order(16);
  Rng rng(12);
  std::vector<int> bits(64);
  for (int& b : bits) b = rng.bit();
  const Vector x = modulate(bits, c);
  REQUIRE(x.size() == 32);
  CHECK(demodulate_hard(x, c) == bits);
}

TEST_CASE("nearest_index picks the closest level") {
  const Constellation c = Constellation::from_qam_order(16);
  CHECK(c.nearest_index(-10.0) == 0);
  CHECK(c.nearest_index(10.0) == 3);
  CHECK(c.nearest_index(c.level(2) + 1e-6) == 2);
}

TEST_CASE("zero LLRs give the uniform prior") {
  const Constellation c = Constellation::from_qam_order(16);
  const SymbolPdf pdf = prior_pdf_from_llrs(Vector::Zero(2), c);
  for (int i = 0; i < 4; ++i) CHECK(pdf(i) == doctest::Approx(0.25));
}

TEST_CASE("strong LLRs concentrate the prior on the labelled level") {
  const Constellation c = Constellation::from_qam_order(16);
  for (int target = 0; target < c.size(); ++target) {
    Vector llrs(2);
    for (int b = 0; b < 2; ++b) {
      llrs(b) = c.label_bit(target, b) ? kDefaultLlrClip : -kDefaultLlrClip;
    }
    const SymbolPdf pdf = prior_pdf_from_llrs(llrs, c);
    CHECK(pdf(target) > 0.999);
  }
}

TEST_CASE("prior pdf matches the per-level Bernoulli product") {
  // Direct enumeration: p(a) proportional to prod_i exp(c_i L_i).
  const Constellation c = Constellation::from_qam_order(16);
  Vector llrs(2);
  llrs << 1.0, -0.5;
  const SymbolPdf pdf = prior_pdf_from_llrs(llrs, c);
  Vector expect(4);
  for (int i = 0; i < 4; ++i) {
    double lp = 0.0;
    for (int b = 0; b < 2; ++b) lp += c.label_bit(i, b) * llrs(b);
    expect(i) = std::exp(lp);
  }
  expect /= expect.sum();
  for (int i = 0; i < 4; ++i) {
    CHECK(pdf(i) == doctest::Approx(expect(i)).epsilon(1e-12));
  }
  CHECK(pdf.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("prior moments: uniform gives zero mean and symbol energy") {
  const Constellation c = Constellation::from_qam_order(16);
  const Moments m = prior_moments(SymbolPdf::Constant(4, 0.25), c);
  CHECK(std::abs(m.mean) < 1e-14);
  CHECK(m.variance == doctest::Approx(c.average_energy()).epsilon(1e-12));
}

TEST_CASE("prior moments: point mass gives the level and zero variance") {
  const Constellation c = Constellation::from_qam_order(16);
  SymbolPdf pdf = SymbolPdf::Zero(4);
  pdf(2) = 1.0;
  const Moments m = prior_moments(pdf, c);
  CHECK(m.mean == doctest::Approx(c.level(2)));
  CHECK(m.variance == doctest::Approx(0.0));
}

TEST_CASE("prior moments agree with direct enumeration") {
  const Constellation c = Constellation::from_qam_order(64);
  Rng rng(4);
  Vector llrs(3);
  for (int i = 0; i < 3; ++i) llrs(i) = rng.normal();
  const SymbolPdf pdf = prior_pdf_from_llrs(llrs, c);
  double mean = 0.0, second = 0.0;
  for (int i = 0; i < c.size(); ++i) {
    mean += pdf(i) * c.level(i);
    second += pdf(i) * c.level(i) * c.level(i);
  }
  const Moments m = prior_moments(pdf, c);
  CHECK(m.mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(m.variance == doctest::Approx(second - mean * mean).epsilon(1e-10));
}

TEST_CASE("pdf_to_extrinsic_llrs computes label-subset mass ratios") {
  const Constellation c = Constellation::from_qam_order(16);
  Rng rng(8);
  SymbolPdf pdf(4);
  for (int i = 0; i < 4; ++i) pdf(i) = rng.uniform() + 0.05;
  pdf /= pdf.sum();
  const Vector llrs = pdf_to_extrinsic_llrs(pdf, c);
  for (int b = 0; b < 2; ++b) {
    double p1 = 0.0, p0 = 0.0;
    for (int i = 0; i < 4; ++i) (c.label_bit(i, b) ? p1 : p0) += pdf(i);
    CHECK(llrs(b) == doctest::Approx(std::log(p1 / p0)).epsilon(1e-12));
  }
}

TEST_CASE("uniform pdf maps to zero LLRs and a point mass saturates the clip") {
  const Constellation c = Constellation::from_qam_order(16);
  const Vector zero = pdf_to_extrinsic_llrs(SymbolPdf::Constant(4, 0.25), c);
  CHECK(zero.cwiseAbs().maxCoeff() < 1e-14);
  SymbolPdf point = SymbolPdf::Zero(4);
  point(0) = 1.0;
  const Vector sat = pdf_to_extrinsic_llrs(point, c, 25.0);
  for (int b = 0; b < 2; ++b) {
    CHECK(std::abs(sat(b)) == doctest::Approx(25.0));
    CHECK((sat(b) > 0) == (c.label_bit(0, b) == 1));
  }
}

TEST_CASE("llr to pdf to llr round trips below the clip") {
  const Constellation c = Constellation::from_qam_order(64);
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    Vector llrs(3);
    for (int i = 0; i < 3; ++i) llrs(i) = 4.0 * (rng.uniform() - 0.5);
    const SymbolPdf pdf = prior_pdf_from_llrs(llrs, c);
    const Vector back = pdf_to_extrinsic_llrs(pdf, c, 100.0);
    // The product prior factorizes over bits, so subset ratios recover the
    // exact inputs.
    CHECK((back - llrs).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("gaussian_to_extrinsic_llrs agrees with the pdf route") {
  const Constellation c = Constellation::from_qam_order(16);
  const double mean = 0.2, var = 0.3;
  const SymbolPdf pdf = normalize_log_pdf(gaussian_log_pdf_on_levels(mean, var, c));
  const Vector a = gaussian_to_extrinsic_llrs(mean, var, c);
  const Vector b = pdf_to_extrinsic_llrs(pdf, c);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("normalize_log_pdf is shift invariant and sums to one") {
  Vector lp(3);
  lp << -1.0, 2.0, 0.5;
  const SymbolPdf p1 = normalize_log_pdf(lp);
  const SymbolPdf p2 = normalize_log_pdf(lp.array() + 300.0);
  CHECK(p1.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((p1 - p2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gaussian log pdf on levels has the right quadratic form") {
  const Constellation c = Constellation::from_qam_order(16);
  const double mean = -0.1, var = 0.42;
  const Vector lp = gaussian_log_pdf_on_levels(mean, var, c);
  // Differences of log densities eliminate the unknown constant.
  for (int i = 1; i < 4; ++i) {
    const double d0 = c.level(0) - mean, di = c.level(i) - mean;
    CHECK(lp(i) - lp(0) ==
          doctest::Approx((d0 * d0 - di * di) / (2.0 * var)).epsilon(1e-12));
  }
}
