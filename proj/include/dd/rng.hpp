#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dd {

// Stream of pseudo-random numbers derived from a root seed. Every consumer
// (shuffling, reparameterization noise, mixing coefficients, pairing, dropout)
// owns its own stream keyed by (purpose, counter) so that changing how much
// randomness one consumer draws never shifts another.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t root, std::string_view purpose, std::uint64_t counter = 0)
      : engine_(derive_seed(root, purpose, counter)) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal() { return normal_(engine_); }
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  bool bernoulli(double p) { return uniform() < p; }

  std::mt19937_64& engine() { return engine_; }

  static std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose, std::uint64_t counter);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Fisher-Yates shuffle driven by Rng::index, so results do not depend on the
// standard library's std::shuffle implementation.
template <typename It>
void shuffle(It first, It last, Rng& rng) {
  const auto n = static_cast<std::size_t>(last - first);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.index(i);
    std::swap(first[i - 1], first[j]);
  }
}

}  // namespace dd
