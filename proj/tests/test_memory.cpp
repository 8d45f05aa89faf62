#include <doctest.h>

#include <random>

#include "o2cap/error.hpp"
#include "o2cap/memory.hpp"
#include "support.hpp"

using namespace o2cap;

namespace {

MemoryBank single(std::vector<double> v, double mu, bool renormalize = true) {
  Matrix f(1, v.size());
  for (std::size_t k = 0; k < v.size(); ++k) f(0, k) = v[k];
  const std::vector<std::vector<std::size_t>> members = {{0}};
  return MemoryBank::from_partition(f, members, MemoryLevel::proxy, mu, renormalize);
}

}  // namespace

TEST_CASE("memory init: singleton, antipodes, empty slot") {
  const MemoryBank b = single({0.6, 0.8}, 0.2);
  CHECK(b.entry(0)[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(b.entry(0)[1] == doctest::Approx(0.8).epsilon(1e-15));

  Matrix f(2, 2, 0.0);
  f(0, 0) = 1.0;
  f(1, 0) = -1.0;
  const std::vector<std::vector<std::size_t>> both = {{0, 1}};
  CHECK_THROWS_AS(MemoryBank::from_partition(f, both, MemoryLevel::proxy, 0.2), InitializationError);
  const std::vector<std::vector<std::size_t>> hole = {{0}, {}};
  CHECK_THROWS_AS(MemoryBank::from_partition(f, hole, MemoryLevel::proxy, 0.2), InitializationError);
  CHECK_THROWS_AS((single({1.0, 0.0}, 1.5)), ParameterError);
}

TEST_CASE("memory init: random partition matches per-slot normalized means") {
  std::mt19937_64 rng(6);
  const Matrix f = testing::random_unit_rows(12, 5, rng);
  const std::vector<std::vector<std::size_t>> members = {{0, 3, 4, 9}, {1, 2}, {5, 6, 7, 8, 10, 11}};
  const MemoryBank b = MemoryBank::from_partition(f, members, MemoryLevel::cluster, 0.2);
  CHECK(b.size() == 3);
  CHECK(b.level() == MemoryLevel::cluster);
  for (std::size_t j = 0; j < 3; ++j) {
    std::vector<double> mean(5, 0.0);
    for (std::size_t i : members[j])
      for (std::size_t k = 0; k < 5; ++k) mean[k] += f(i, k);
    double n = 0.0;
    for (double v : mean) n += v * v;
    n = std::sqrt(n);
    for (std::size_t k = 0; k < 5; ++k) CHECK(std::abs(b.entry(j)[k] - mean[k] / n) < 1e-9);
  }
}

TEST_CASE("memory update: fixed point, full replacement and a hand-checked blend") {
  const std::vector<double> feature = {0.0, 1.0};
  MemoryBank keep = single({1.0, 0.0}, 1.0);
  keep.update(0, feature);
  CHECK(keep.entry(0)[0] == 1.0);
  CHECK(keep.entry(0)[1] == 0.0);

  MemoryBank replace = single({1.0, 0.0}, 0.0);
  replace.update(0, feature);
  CHECK(replace.entry(0)[0] == 0.0);
  CHECK(replace.entry(0)[1] == 1.0);

  MemoryBank blend = single({1.0, 0.0}, 0.2);
  blend.update(0, feature);
  CHECK(blend.entry(0)[0] == doctest::Approx(0.24253562503633297).epsilon(1e-12));
  CHECK(blend.entry(0)[1] == doctest::Approx(0.97014250014533188).epsilon(1e-12));

  MemoryBank raw = single({1.0, 0.0}, 0.2, false);
  raw.update(0, feature);
  CHECK(raw.entry(0)[0] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(raw.entry(0)[1] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("memory update: degenerate blend leaves the entry and counts") {
  MemoryBank b = single({1.0, 0.0}, 0.5);
  const std::vector<double> opposite = {-1.0, 0.0};
  b.update(0, opposite);
  CHECK(b.entry(0)[0] == 1.0);
  CHECK(b.degeneracies() == 1);
  CHECK_THROWS_AS(b.update(1, opposite), ParameterError);
  CHECK_THROWS_AS((b.update(0, std::vector<double>{1.0})), ShapeError);
}

TEST_CASE("memory update: one entry changes and all stay unit norm") {
  std::mt19937_64 rng(10);
  const Matrix f = testing::random_unit_rows(30, 6, rng);
  std::vector<std::vector<std::size_t>> members(10);
  for (std::size_t i = 0; i < 30; ++i) members[i % 10].push_back(i);
  MemoryBank b = MemoryBank::from_partition(f, members, MemoryLevel::proxy, 0.2);
  std::uniform_int_distribution<std::size_t> slot(0, 9);
  for (int step = 0; step < 500; ++step) {
    const Matrix before = b.entries();
    const std::size_t s = slot(rng);
    b.update(s, testing::random_unit(6, rng));
    for (std::size_t j = 0; j < 10; ++j) {
      CHECK(std::abs(norm(b.entry(j)) - 1.0) < 1e-6);
      if (j == s) continue;
      for (std::size_t k = 0; k < 6; ++k) CHECK(b.entry(j)[k] == before(j, k));
    }
  }
}
