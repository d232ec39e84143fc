#include "gep/modem.hpp"

#include <algorithm>
#include <cmath>

#include "gep/numerics.hpp"

namespace gep {

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

int gray_encode(int m) { return m ^ (m >> 1); }

}  // namespace

Constellation::Constellation(int points_per_dim) {
  if (!is_power_of_two(points_per_dim)) {
    throw Error("Constellation: size must be a power of two");
  }
  const int m = points_per_dim;
  bits_ = 0;
  for (int v = m; v > 1; v >>= 1) ++bits_;
  // Odd-integer levels +-1, +-3, ... scaled for unit complex-symbol energy.
  const double scale = std::sqrt(3.0 / (2.0 * (double(m) * m - 1.0)));
  levels_.resize(m);
  gray_codes_.resize(m);
  for (int i = 0; i < m; ++i) {
    levels_(i) = scale * (2 * i - (m - 1));
    gray_codes_[i] = gray_encode(i);
  }
  energy_ = levels_.squaredNorm() / m;
}

Constellation Constellation::from_qam_order(int qam_points) {
  const int m2 = qam_points;
  int root = static_cast<int>(std::lround(std::sqrt(double(m2))));
  if (root * root != m2) {
    throw Error("Constellation: QAM order must be a perfect square");
  }
  return Constellation(root);
}

int Constellation::index_of_bits(const std::vector<int>& bits) const {
  if (static_cast<int>(bits.size()) != bits_) {
    throw InvalidLength("Constellation: wrong number of label bits");
  }
  int gray = 0;
  for (int b : bits) gray = (gray << 1) | (b & 1);
  for (int i = 0; i < size(); ++i) {
    if (gray_codes_[i] == gray) return i;
  }
  throw Error("Constellation: label not found");
}

int Constellation::nearest_index(double x) const {
  int best = 0;
  double best_dist = std::abs(x - levels_(0));
  for (int i = 1; i < size(); ++i) {
    const double d = std::abs(x - levels_(i));
    if (d < best_dist) {
      best_dist = d;
      best = i;
    }
  }
  return best;
}

Vector modulate(const std::vector<int>& bits, const Constellation& c) {
  const int q = c.bits_per_symbol();
  if (bits.size() % q != 0) {
    throw InvalidLength("modulate: bit count not divisible by Q");
  }
  const int n = static_cast<int>(bits.size()) / q;
  Vector symbols(n);
  std::vector<int> group(q);
  for (int s = 0; s < n; ++s) {
    for (int i = 0; i < q; ++i) group[i] = bits[s * q + i];
    symbols(s) = c.level(c.index_of_bits(group));
  }
  return symbols;
}

std::vector<int> demodulate_hard(const Vector& symbols,
                                 const Constellation& c) {
  const int q = c.bits_per_symbol();
  std::vector<int> bits;
  bits.reserve(symbols.size() * q);
  for (Eigen::Index s = 0; s < symbols.size(); ++s) {
    const int idx = c.nearest_index(symbols(s));
    for (int i = 0; i < q; ++i) bits.push_back(c.label_bit(idx, i));
  }
  return bits;
}

SymbolPdf prior_pdf_from_llrs(const Vector& llrs, const Constellation& c) {
  const int q = c.bits_per_symbol();
  if (llrs.size() != q) {
    throw InvalidLength("prior_pdf_from_llrs: expected Q llrs");
  }
  // log p(a) = sum_i [c_i L_i - log(1 + e^{L_i})]
  Vector log_pdf(c.size());
  for (int a = 0; a < c.size(); ++a) {
    double lp = 0.0;
    for (int i = 0; i < q; ++i) {
      lp += c.label_bit(a, i) * llrs(i) - softplus(llrs(i));
    }
    log_pdf(a) = lp;
  }
  return normalize_log_pdf(log_pdf);
}

Moments prior_moments(const SymbolPdf& pdf, const Constellation& c) {
  const double mean = pdf.dot(c.levels());
  double var = 0.0;
  for (int a = 0; a < c.size(); ++a) {
    const double d = c.level(a) - mean;
    var += pdf(a) * d * d;
  }
  return {mean, std::max(var, 0.0)};
}

namespace {

Vector subset_llrs(const Vector& log_pdf, const Constellation& c, double clip) {
  const int q = c.bits_per_symbol();
  Vector llrs(q);
  for (int i = 0; i < q; ++i) {
    double log_one = -std::numeric_limits<double>::infinity();
    double log_zero = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < c.size(); ++a) {
      if (c.label_bit(a, i)) {
        log_one = log_sum_exp(log_one, log_pdf(a));
      } else {
        log_zero = log_sum_exp(log_zero, log_pdf(a));
      }
    }
    double llr = log_one - log_zero;
    if (std::isnan(llr)) llr = 0.0;
    llrs(i) = std::clamp(llr, -clip, clip);
  }
  return llrs;
}

}  // namespace

Vector pdf_to_extrinsic_llrs(const SymbolPdf& pdf, const Constellation& c,
                             double clip) {
  Vector log_pdf(pdf.size());
  for (Eigen::Index a = 0; a < pdf.size(); ++a) {
    log_pdf(a) = pdf(a) > 0.0 ? std::log(pdf(a))
                              : -std::numeric_limits<double>::infinity();
  }
  return subset_llrs(log_pdf, c, clip);
}

Vector gaussian_log_pdf_on_levels(double mean, double variance,
                                  const Constellation& c) {
  Vector log_pdf(c.size());
  const double inv2v = 0.5 / variance;
  for (int a = 0; a < c.size(); ++a) {
    const double d = c.level(a) - mean;
    log_pdf(a) = -d * d * inv2v;
  }
  return log_pdf;
}

Vector gaussian_to_extrinsic_llrs(double mean, double variance,
                                  const Constellation& c, double clip) {
  if (!(variance > 0.0)) {
    throw NumericalDomain("gaussian_to_extrinsic_llrs: variance must be > 0");
  }
  return subset_llrs(gaussian_log_pdf_on_levels(mean, variance, c), c, clip);
}

SymbolPdf normalize_log_pdf(const Vector& log_pdf) {
  const double peak = log_pdf.maxCoeff();
  Vector pdf = (log_pdf.array() - peak).exp();
  const double total = pdf.sum();
  return pdf / total;
}

}  // namespace gep
