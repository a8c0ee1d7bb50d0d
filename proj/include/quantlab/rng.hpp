#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace quantlab {

// splitmix64; used to derive independent stream seeds from (seed, tag, index).
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag,
                                 std::uint64_t index = 0) {
  std::uint64_t h = mix64(seed);
  for (char c : tag) h = mix64(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
  return mix64(h ^ mix64(index));
}

// Deterministic sampler. All transforms are explicit (inverse CDF /
// Box-Muller) rather than std::*_distribution, so a given seed produces the
// same stream on every standard library.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on (0, 1]: never zero, so it is safe under log() and pow().
  double uniform01() {
    const std::uint64_t bits = engine_() >> 11;  // 53 random bits
    return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Symmetric Pareto with tail index alpha: |X| = u^(-1/alpha) on [1, inf),
  // random sign. E[X^2] = alpha/(alpha-2) for alpha > 2.
  double pareto_symmetric(double alpha) {
    const double magnitude = std::pow(uniform01(), -1.0 / alpha);
    return (engine_() & 1ull) ? magnitude : -magnitude;
  }

  // Fisher-Yates support.
  std::size_t below(std::size_t n) {
    // Rejection-free modulo is fine here; n is tiny relative to 2^64.
    return static_cast<std::size_t>(engine_() % n);
  }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace quantlab
