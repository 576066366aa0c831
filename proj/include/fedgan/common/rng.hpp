#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedgan {

// Mixes a base seed with a path of integers into an independent stream seed.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path);

// Stream purposes used with derive_seed so that no two consumers share draws.
enum class Stream : std::uint64_t {
  init_generator = 1,
  init_encoder = 2,
  init_critic = 3,
  batch = 4,
  noise = 5,
  epsilon = 6,
  injection = 7,
  synthetic = 8,
  inversion = 9,
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return unit_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit_(engine_); }
  double normal() { return normal_(engine_); }
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace fedgan
