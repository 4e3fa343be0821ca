#include "homest/rng.hpp"

#include <cmath>
#include <numbers>

namespace homest {

std::uint64_t Stream::mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Stream::Stream(std::uint64_t master_seed, StreamTag tag, std::uint64_t replicate) {
  std::uint64_t k = mix(master_seed + gamma());
  k = mix(k ^ (static_cast<std::uint64_t>(tag) * 0xD1B54A32D192ED03ULL));
  key_ = mix(k ^ (replicate * 0xABC98388FB8FAC03ULL + 0x8CB92BA72F3D8DD7ULL));
}

double Stream::uniform() {
  // 53 random mantissa bits, shifted off zero.
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double Stream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

}  // namespace homest
