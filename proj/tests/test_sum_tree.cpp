#include <doctest.h>

#include <cmath>
#include <vector>

#include "fluctuant/rng.hpp"
#include "fluctuant/sum_tree.hpp"

using fluctuant::KahanAccumulator;
using fluctuant::RandomSource;
using fluctuant::SumTree;

TEST_CASE("total tracks leaf updates exactly for exact weights") {
  SumTree t(10);
  for (std::size_t i = 0; i < 10; ++i) t.set(i, static_cast<double>(i));
  CHECK(t.total() == doctest::Approx(45.0).epsilon(1e-15));
  t.set(3, 0.0);
  CHECK(t.total() == doctest::Approx(42.0).epsilon(1e-15));
  CHECK(t.leaf(3) == 0.0);
  CHECK(t.leaf(9) == 9.0);
}

TEST_CASE("sample returns the leaf owning each cumulative interval") {
  SumTree t(4);
  t.set(0, 1.0);
  t.set(1, 0.0);
  t.set(2, 2.0);
  t.set(3, 1.0);
  CHECK(t.sample(0.0) == 0);
  CHECK(t.sample(0.999) == 0);
  CHECK(t.sample(1.0) == 2);  // leaf 1 has zero weight
  CHECK(t.sample(2.5) == 2);
  CHECK(t.sample(3.0) == 3);
  CHECK(t.sample(3.999) == 3);
}

TEST_CASE("sampling frequencies match weights") {
  SumTree t(7);
  const double w[] = {0.5, 0.0, 1.5, 2.0, 0.25, 0.75, 5.0};
  double total = 0;
  for (std::size_t i = 0; i < 7; ++i) {
    t.set(i, w[i]);
    total += w[i];
  }
  RandomSource rng(2024, 0);
  std::vector<int> hits(7, 0);
  const int n = 400000;
  for (int i = 0; i < n; ++i)
    ++hits[t.sample(total * (1.0 - rng.u01()))];
  CHECK(hits[1] == 0);
  for (std::size_t i = 0; i < 7; ++i)
    CHECK(std::abs(hits[i] / static_cast<double>(n) - w[i] / total) < 5e-3);
}

TEST_CASE("non power of two sizes never sample past the last leaf") {
  SumTree t(5);  // padded to 8 leaves internally
  for (std::size_t i = 0; i < 5; ++i) t.set(i, 1.0);
  RandomSource rng(3, 1);
  for (int i = 0; i < 20000; ++i) {
    const std::size_t k = t.sample(t.total() * (1.0 - rng.u01()));
    REQUIRE(k < 5);
  }
}

TEST_CASE("stage plus rebuild equals repeated set") {
  SumTree a(33), b(33);
  RandomSource rng(8, 0);
  for (std::size_t i = 0; i < 33; ++i) {
    const double w = rng.u01();
    a.set(i, w);
    b.stage(i, w);
  }
  b.rebuild();
  CHECK(a.total() == b.total());
  for (double v = 0.05; v < 1.0; v += 0.13)
    CHECK(a.sample(v * a.total()) == b.sample(v * b.total()));
}

TEST_CASE("kahan accumulator absorbs many tiny increments") {
  KahanAccumulator k;
  double plain = 0.0;
  const double dt = 1e-10;
  for (int i = 0; i < 10000000; ++i) {
    k.add(dt);
    plain += dt;
  }
  (void)plain;
  CHECK(std::abs(k.value() - 1e-3) / 1e-3 < 1e-12);
}
