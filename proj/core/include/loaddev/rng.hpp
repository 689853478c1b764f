#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace loaddev {

/// Deterministic random source used for design randomization and simulation.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard.  All derived draws (bounded integers, uniforms, normals,
/// shuffles) are implemented here instead of through std::*_distribution,
/// whose results are implementation-defined.  A plan or simulated dataset
/// therefore regenerates byte-identically from its seed on any platform.
class Rng {
 public:
  /// Identity of the draw scheme, frozen into plan files.  Bump the suffix
  /// whenever the derivation of any draw changes.
  static constexpr const char* kAlgorithm = "mt19937_64/v1";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Unbiased uniform draw from [0, n).  n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform01();

  /// Standard normal via Box-Muller; the second value of each pair is cached.
  double normal();

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(below(i))]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace loaddev
