#ifndef GEP_MODEM_HPP
#define GEP_MODEM_HPP

#include <vector>

#include "gep/common.hpp"

namespace gep {

constexpr double kDefaultLlrClip = 30.0;

/// Real PAM constellation obtained by splitting a square QAM alphabet into
/// its two quadrature components.  Levels are sorted ascending and scaled so
/// the parent complex constellation has unit average energy; the bit labels
/// follow a binary-reflected Gray code over the sorted levels, most
/// significant bit first.
class Constellation {
 public:
  /// points_per_dim is the real cardinality M (e.g. 2 for QPSK, 4 for 16-QAM).
  explicit Constellation(int points_per_dim);

  /// Constellation for a complex QAM alphabet of the given size (4, 16, 64...).
  static Constellation from_qam_order(int qam_points);

  int size() const { return static_cast<int>(levels_.size()); }
  int bits_per_symbol() const { return bits_; }
  double average_energy() const { return energy_; }
  const Vector& levels() const { return levels_; }
  double level(int index) const { return levels_(index); }

  /// Bit i (MSB first) of the label attached to the given level index.
  int label_bit(int level_index, int bit) const {
    return (gray_codes_[level_index] >> (bits_ - 1 - bit)) & 1;
  }

  /// Level index whose label equals the given bits (MSB first).
  int index_of_bits(const std::vector<int>& bits) const;

  /// Index of the level nearest to x.
  int nearest_index(double x) const;

 private:
  Vector levels_;
  std::vector<int> gray_codes_;  // label of each sorted level
  int bits_;
  double energy_;
};

/// Per-symbol probability mass over the constellation levels.
using SymbolPdf = Vector;

/// Map bits to PAM symbols; bit count must be a multiple of Q.
Vector modulate(const std::vector<int>& bits, const Constellation& c);

/// Hard-demap symbols back to bits (nearest level).
std::vector<int> demodulate_hard(const Vector& symbols, const Constellation& c);

/// Product-of-Bernoulli prior over levels from the Q per-bit LLRs
/// (LLR convention: log P(bit=1)/P(bit=0)).  Result is normalized.
SymbolPdf prior_pdf_from_llrs(const Vector& llrs, const Constellation& c);

/// Mean and variance of a normalized symbol PDF.
struct Moments {
  double mean;
  double variance;
};
Moments prior_moments(const SymbolPdf& pdf, const Constellation& c);

/// Bitwise LLRs from a symbol PDF by label-subset mass ratios, clipped.
Vector pdf_to_extrinsic_llrs(const SymbolPdf& pdf, const Constellation& c,
                             double clip = kDefaultLlrClip);

/// Same, for a Gaussian N(mean, variance) evaluated on the levels.
Vector gaussian_to_extrinsic_llrs(double mean, double variance,
                                  const Constellation& c,
                                  double clip = kDefaultLlrClip);

/// Log-density of each level under N(mean, variance), up to a constant.
Vector gaussian_log_pdf_on_levels(double mean, double variance,
                                  const Constellation& c);

/// Normalized PDF from unnormalized log-mass values.
SymbolPdf normalize_log_pdf(const Vector& log_pdf);

}  // namespace gep

#endif
