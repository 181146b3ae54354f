#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace armr {

/// 64-bit FNV-1a, used for stream names and input-file fingerprints.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// Deterministic generator (xoshiro256**) seeded through splitmix64.
/// Distributions are implemented here rather than taken from <random> so
/// that a seed produces the same stream on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent substream keyed by purpose, e.g. Rng::stream(seed, "init").
  /// Adding a new consumer never shifts the draws of an existing one.
  static Rng stream(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0);

  std::uint64_t next();
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  std::uint64_t below(std::uint64_t n);   // [0, n)
  bool bernoulli(double p);
  double exponential(double mean);
  /// Number of failures before the first success, success probability p.
  int geometric(double p);
  int poisson(double lambda);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t s_[4];
};

}  // namespace armr
