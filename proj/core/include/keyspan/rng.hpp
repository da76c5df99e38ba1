#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace keyspan {

// Deterministic RNG behind every stochastic component. The mt19937_64
// engine is fully specified by the standard and the distributions below
// are hand-rolled, so streams reproduce bit-for-bit across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal(double mean = 0.0, double stddev = 1.0);

  // Unbiased integer in [0, n), n > 0.
  std::uint64_t below(std::uint64_t n);

  // Inclusive ends.
  int range_int(int lo, int hi);

  template <class T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(below(i + 1));
      std::swap(v[i], v[j]);
    }
  }

  // Stable sub-stream seed for a named component.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace keyspan
