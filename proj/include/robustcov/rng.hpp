#pragma once

#include <cstdint>
#include <random>

namespace robustcov {

/// SplitMix64 finalizer. Used to turn (seed, stream) pairs into well-mixed
/// engine seeds so parallel replicates get independent reproducible streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

/// One reproducible random stream. Two streams derived from the same seed
/// with distinct stream ids are independent for simulation purposes.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream)
      : engine_(derive_seed(seed, stream)) {}

  double normal() { return normal_(engine_); }
  double uniform01() { return uniform_(engine_); }
  bool bernoulli(double p) { return uniform01() < p; }

  double gamma(double shape, double scale) {
    std::gamma_distribution<double> dist(shape, scale);
    return dist(engine_);
  }

  double chi_squared(double dof) { return gamma(0.5 * dof, 2.0); }

  /// Uniform integer in [0, bound).
  std::uint64_t uniform_int(std::uint64_t bound) {
    std::uniform_int_distribution<std::uint64_t> dist(0, bound - 1);
    return dist(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace robustcov
