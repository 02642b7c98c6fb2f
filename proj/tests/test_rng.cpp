#include <doctest.h>

#include <cmath>

#include "dart/rng.hpp"

using namespace dart;

TEST_CASE("identical seeds give identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
}

TEST_CASE("child streams depend on the path, not on draw order") {
  Rng root(7);
  root.next();
  root.next();
  Rng fresh(7);
  CHECK(root.stream(3).next() == fresh.stream(3).next());
  CHECK(root.stream(3).next() != fresh.stream(4).next());
  CHECK(root.stream(1, 2).next() == fresh.stream(1, 2).next());
  CHECK(root.stream(1, 2).next() != fresh.stream(2, 1).next());
}

TEST_CASE("uniform01 lies in [0, 1) and has sane moments") {
  Rng rng(11);
  double sum = 0.0, sum2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    sum2 += u * u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(sum2 / n == doctest::Approx(1.0 / 3.0).epsilon(0.01));
}

TEST_CASE("normal has zero mean and unit variance") {
  Rng rng(13);
  double sum = 0.0, sum2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum2 += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("uniform_below is unbiased over small ranges") {
  Rng rng(17);
  int counts[5] = {0, 0, 0, 0, 0};
  const int n = 100000;
  for (int i = 0; i < n; ++i) counts[rng.uniform_below(5)]++;
  for (int c : counts) CHECK(std::abs(c - n / 5) < 1000);
}
