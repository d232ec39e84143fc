#ifndef GEP_RNG_HPP
#define GEP_RNG_HPP

#include <cstdint>
#include <string_view>

namespace gep {

/// Counter-based pseudorandom generator (SplitMix64 core).
///
/// A stream is identified by a 64-bit key; each draw advances a counter and
/// mixes (key, counter), so the sequence depends only on the key and the
/// number of draws made.  Substreams for independent purposes (channel,
/// noise, bits, weights, llr synthesis, ...) are derived by hashing a tag and
/// an index into a fresh key; derivation never disturbs the parent stream.
/// Instances are single-owner: concurrent trials each derive their own.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : key_(mix(seed ^ kKeyTweak)), counter_(0) {}

  /// Derived generator for a named purpose, e.g. substream("noise", trial).
  Rng substream(std::string_view tag, std::uint64_t index = 0) const;

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGamma); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer on [0, n).
  std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

  bool bit() { return (next_u64() & 1u) != 0; }

  /// Standard normal draw via Box-Muller (pairs cached).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // UniformRandomBitGenerator interface.
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return next_u64(); }

 private:
  Rng(std::uint64_t key, int) : key_(key), counter_(0) {}

  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;
  static constexpr std::uint64_t kKeyTweak = 0x5851f42d4c957f2dull;

  static std::uint64_t mix(std::uint64_t z);

  std::uint64_t key_;
  std::uint64_t counter_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace gep

#endif
