#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace spikemusic {

/// splitmix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Per-trial seed stream: hash of (master_seed, stream, index). Trials seeded
/// this way are independent of scheduling, so sweeps reproduce bit-for-bit
/// regardless of worker count.
constexpr std::uint64_t derive_seed(std::uint64_t master_seed,
                                    std::uint64_t stream,
                                    std::uint64_t index = 0) noexcept {
  return mix64(mix64(mix64(master_seed) ^ stream) ^ index);
}

/// Standard normal sampler: mt19937_64 uniforms (fully specified by the C++
/// standard, hence reproducible across implementations) pushed through the
/// Box-Muller transform. One engine per trial; not thread-safe to share.
class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed) : engine_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] keeps the log finite; u2 in [0, 1).
    const double u1 = ((engine_() >> 11) + 1) * 0x1.0p-53;
    const double u2 = (engine_() >> 11) * 0x1.0p-53;
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace spikemusic
