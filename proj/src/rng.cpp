#include "gep/rng.hpp"

#include <cmath>

namespace gep {

std::uint64_t Rng::mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

Rng Rng::substream(std::string_view tag, std::uint64_t index) const {
  std::uint64_t h = key_;
  for (char c : tag) {
    h = mix(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
  }
  h = mix(h ^ mix(index + kGamma));
  return Rng(h, 0);
}

double Rng::normal() {
  if (have_cached_) {
    have_cached_ = false;
    return cached_;
  }
  // Box-Muller; reject u1 == 0 so the log is finite.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  cached_ = radius * std::sin(angle);
  have_cached_ = true;
  return radius * std::cos(angle);
}

}  // namespace gep
