#include "keyspan/rng.hpp"

#include <cmath>

namespace keyspan {

double Rng::normal(double mean, double stddev) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + spare_ * stddev;
  }
  // Box-Muller; 1-u avoids log(0).
  constexpr double two_pi = 6.283185307179586476925286766559;
  const double a = uniform() * two_pi;
  const double u = 1.0 - uniform();
  const double r = std::sqrt(-2.0 * std::log(u));
  spare_ = std::sin(a) * r;
  has_spare_ = true;
  return mean + std::cos(a) * r * stddev;
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) return 0;
  const std::uint64_t rem = std::uint64_t(-1) % n;
  const std::uint64_t limit = std::uint64_t(-1) - rem;
  std::uint64_t x;
  do {
    x = eng_();
  } while (x > limit);
  return x % n;
}

int Rng::range_int(int lo, int hi) {
  if (hi <= lo) return lo;
  return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo) + 1));
}

std::uint64_t Rng::derive(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over (seed, stream)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace keyspan
