#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "keyspan/rng.hpp"

using keyspan::Rng;

TEST_CASE("uniform stays in [0, 1) and repeats per seed") {
  Rng a(42), b(42), c(43);
  bool diverged = false;
  for (int i = 0; i < 1000; ++i) {
    double x = a.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
    CHECK(x == b.uniform());
    if (x != c.uniform()) diverged = true;
  }
  CHECK(diverged);
}

TEST_CASE("below covers exactly [0, n)") {
  Rng rng(7);
  std::vector<int> seen(5, 0);
  for (int i = 0; i < 5000; ++i) {
    std::uint64_t v = rng.below(5);
    REQUIRE(v < 5);
    ++seen[static_cast<int>(v)];
  }
  for (int count : seen) CHECK(count > 0);
}

TEST_CASE("range_int hits both ends of an inclusive range") {
  Rng rng(11);
  bool low = false, high = false;
  for (int i = 0; i < 2000; ++i) {
    int v = rng.range_int(3, 6);
    REQUIRE(v >= 3);
    REQUIRE(v <= 6);
    low = low || v == 3;
    high = high || v == 6;
  }
  CHECK(low);
  CHECK(high);
}

TEST_CASE("shuffle permutes without losing elements") {
  Rng rng(5);
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  std::vector<int> orig = v;
  rng.shuffle(v);
  CHECK(v != orig);  // astronomically unlikely to be identity
  std::sort(v.begin(), v.end());
  CHECK(v == orig);
}

TEST_CASE("derive gives independent reproducible streams") {
  const std::uint64_t s1 = Rng::derive(9, 0);
  const std::uint64_t s2 = Rng::derive(9, 1);
  CHECK(s1 != s2);
  CHECK(s1 == Rng::derive(9, 0));
  CHECK(Rng::derive(10, 0) != s1);
}

TEST_CASE("normal draws have roughly the requested moments") {
  Rng rng(123);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal(2.0, 3.0);
    sum += x;
    sq += x * x;
  }
  double mean = sum / n;
  double var = sq / n - mean * mean;
  CHECK(std::abs(mean - 2.0) < 0.1);
  CHECK(std::abs(std::sqrt(var) - 3.0) < 0.1);
}
