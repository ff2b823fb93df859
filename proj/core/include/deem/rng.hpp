#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace deem {

/// Seed for a named sub-stream. Same (seed, name) always gives the same value.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::string_view stream) : engine_(derive_seed(seed, stream)) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal(double mean, double stddev) { return std::normal_distribution<double>(mean, stddev)(engine_); }
  int uniform_int(int count) { return std::uniform_int_distribution<int>(0, count - 1)(engine_); }

  /// Draws an index with probability proportional to `weights` (nonnegative, not all zero).
  int categorical(std::span<const double> weights);

  /// Symmetric Dirichlet(1, ..., 1) draw written into `out`.
  void flat_dirichlet(std::span<double> out);

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace deem
