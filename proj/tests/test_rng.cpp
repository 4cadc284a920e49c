#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>
#include <set>

#include "d3pmlab/rng.hpp"

using namespace d3pmlab;

TEST_CASE("identical seeds replay identical streams") {
  Rng a(42), b(42);
  for (int k = 0; k < 1000; ++k) {
    CHECK(a.next_u64() == b.next_u64());
  }
}

TEST_CASE("streams with different purposes are decorrelated") {
  Rng root(7);
  Rng a = root.stream("forward");
  Rng b = root.stream("shuffle");
  int agreements = 0;
  for (int k = 0; k < 64; ++k) {
    agreements += a.next_u64() == b.next_u64();
  }
  CHECK(agreements == 0);
}

TEST_CASE("indexed substreams are independent of draw order") {
  Rng root(9);
  Rng early = root.stream("x").stream(3);
  Rng late = Rng(9).stream("x").stream(3);
  CHECK(early.next_u64() == late.next_u64());
}

TEST_CASE("doubles are uniform on the unit interval") {
  Rng rng(123);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int k = 0; k < n; ++k) {
    const double u = rng.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    sq += u * u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.005);
  CHECK(std::abs(sq / n - 1.0 / 3.0) < 0.005);
}

TEST_CASE("bernoulli matches its rate") {
  Rng rng(5);
  int hits = 0;
  const int n = 100000;
  for (int k = 0; k < n; ++k) hits += rng.bernoulli(0.3);
  CHECK(std::abs(hits / static_cast<double>(n) - 0.3) < 0.01);
}

TEST_CASE("categorical draws follow the weights") {
  Rng rng(17);
  Eigen::VectorXd weights(3);
  weights << 1.0, 2.0, 1.0;
  Eigen::Vector3d counts = Eigen::Vector3d::Zero();
  const int n = 40000;
  for (int k = 0; k < n; ++k) counts[rng.categorical(weights)] += 1;
  CHECK(std::abs(counts[0] / n - 0.25) < 0.01);
  CHECK(std::abs(counts[1] / n - 0.50) < 0.01);
  CHECK(std::abs(counts[2] / n - 0.25) < 0.01);
}

TEST_CASE("shuffle permutes deterministically") {
  std::vector<int> base(50);
  std::iota(base.begin(), base.end(), 0);
  auto a = base, b = base;
  Rng(3).stream("shuffle").shuffle(a);
  Rng(3).stream("shuffle").shuffle(b);
  CHECK(a == b);
  CHECK(a != base);
  CHECK(std::set<int>(a.begin(), a.end()).size() == base.size());
}
