#include "loaddev/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace loaddev {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) {
    throw std::invalid_argument("Rng::below: n must be positive");
  }
  // Reject the wrap-around remainder zone so that % n is unbiased.
  const std::uint64_t threshold = (0 - n) % n;
  std::uint64_t r = engine_();
  while (r < threshold) {
    r = engine_();
  }
  return r % n;
}

double Rng::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform01();  // (0, 1], keeps log() finite
  const double u2 = uniform01();
  const double mag = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * std::numbers::pi * u2;
  spare_ = mag * std::sin(ang);
  has_spare_ = true;
  return mag * std::cos(ang);
}

}  // namespace loaddev
