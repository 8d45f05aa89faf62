#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "o2cap/association.hpp"
#include "o2cap/error.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace o2cap;

namespace {

// Random clustering of n instances over `cams` cameras with everything needed
// to run associations against it.
struct World {
  Dataset data;
  RetainedSet retained;
  ProxyTable table;
  MemoryBank bank;
  std::vector<LabeledInstance> labeled;
  std::vector<int> proxy_camera;
};

World make_world(std::size_t n, int clusters, int cams, std::mt19937_64& rng, std::size_t dim = 8) {
  World w;
  w.data.features = testing::random_unit_rows(n, dim, rng);
  std::uniform_int_distribution<int> label(1, clusters), cam(1, cams);
  ClusterAssignment a;
  a.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    a.labels[i] = i < static_cast<std::size_t>(clusters) ? static_cast<int>(i) + 1 : label(rng);
    w.data.cameras.push_back(i < static_cast<std::size_t>(cams) ? static_cast<int>(i) + 1 : cam(rng));
    w.data.true_ids.push_back(a.labels[i]);
  }
  a.num_clusters = clusters;
  w.retained = discard_outliers(a);
  w.table = split_by_camera(w.retained, w.data.cameras, cams, n);
  w.bank = MemoryBank::from_partition(w.data.features, w.table.members(), MemoryLevel::proxy, 0.2);
  w.labeled = label_instances(w.data, w.retained, w.table);
  for (const Proxy& p : w.table.proxies()) w.proxy_camera.push_back(p.camera);
  return w;
}

}  // namespace

TEST_CASE("association params: validation") {
  CHECK_NOTHROW((AssociationParams{50, 3, 0.15}.validate(6)));
  CHECK_THROWS_AS((AssociationParams{0, 3, 0.15}.validate(6)), ConfigError);
  CHECK_THROWS_AS((AssociationParams{50, 7, 0.15}.validate(6)), ConfigError);
  CHECK_THROWS_AS((AssociationParams{50, 0, 0.15}.validate(6)), ConfigError);
  CHECK_THROWS_AS((AssociationParams{50, 3, 1.5}.validate(6)), ConfigError);
}

TEST_CASE("offline association: cluster proxies are the positives") {
  // cluster 1 spread over cameras 1 and 2, cluster 2 only on camera 1
  Dataset d;
  std::mt19937_64 rng(1);
  d.features = testing::random_unit_rows(5, 4, rng);
  d.cameras = {1, 2, 1, 1, 2};
  d.true_ids = {1, 1, 2, 2, 1};
  const ClusterAssignment a{{1, 1, 2, 2, 1}, 2};
  const RetainedSet r = discard_outliers(a);
  const ProxyTable t = split_by_camera(r, d.cameras, 2, 5);
  const MemoryBank bank = MemoryBank::from_partition(d.features, t.members(), MemoryLevel::proxy, 0.2);
  const auto lab = label_instances(d, r, t);
  const AssociationParams p{5, 1, 0.15};

  const AssociationResult split = associate_offline(d.features.row(0), lab[0], t, bank, p);
  const auto expected = t.proxies_of_cluster(1);
  CHECK(expected.size() == 2);
  CHECK(split.positives == expected);
  CHECK(split.mode == AssociationMode::offline);
  const AssociationResult lone = associate_offline(d.features.row(2), lab[2], t, bank, p);
  CHECK(lone.positives == std::vector<std::size_t>{*lab[2].proxy_index});
  CHECK(lone.negatives.size() == 2);

  LabeledInstance outlier;
  CHECK_THROWS_AS(associate_offline(d.features.row(0), outlier, t, bank, p), LabelError);
}

TEST_CASE("offline association: hard negatives match a full sort") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    World w = make_world(90, 12, 4, rng);
    const AssociationParams p{5, 2, 0.15};
    for (const LabeledInstance& li : w.labeled) {
      const auto f = w.data.features.row(li.index);
      const AssociationResult r = associate_offline(f, li, w.table, w.bank, p);
      std::vector<double> sims(w.bank.size());
      for (std::size_t j = 0; j < sims.size(); ++j) sims[j] = dot(f, w.bank.entry(j));
      const std::set<std::size_t> pos(r.positives.begin(), r.positives.end());
      CHECK(r.negatives == oracle::knn(sims, 5, pos));
      std::set<std::size_t> truth;
      for (std::size_t j = 0; j < w.table.size(); ++j)
        if (w.table.proxy(j).cluster == li.global_label) truth.insert(j);
      CHECK(pos == truth);
    }
  }
}

TEST_CASE("balanced similarity: endpoints and a hand-checked blend") {
  Matrix e(3, 2, 0.0);
  e(0, 0) = 1.0;
  e(1, 0) = 0.8, e(1, 1) = 0.6;
  e(2, 1) = 1.0;
  const std::vector<std::vector<std::size_t>> members = {{0}, {1}, {2}};
  const MemoryBank bank = MemoryBank::from_partition(e, members, MemoryLevel::proxy, 0.2);
  const std::vector<double> f = {0.6, 0.8};
  CHECK(balanced_similarity(f, 0, 2, bank, 1.0) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(balanced_similarity(f, 1, 1, bank, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  // f.K[1] = 0.96, K[0].K[1] = 0.8
  CHECK(balanced_similarity(f, 0, 1, bank, 0.15) == doctest::Approx(0.15 * 0.96 + 0.85 * 0.8).epsilon(1e-15));
  // f.K[j] = 0.4, K[self].K[j] = 0.8
  Matrix h(2, 2, 0.0);
  h(0, 0) = 0.8, h(0, 1) = 0.6;
  h(1, 0) = 1.0;
  const std::vector<std::vector<std::size_t>> two = {{0}, {1}};
  const MemoryBank hb = MemoryBank::from_partition(h, two, MemoryLevel::proxy, 0.2);
  const std::vector<double> q = {0.4, std::sqrt(0.84)};
  CHECK(balanced_similarity(q, 0, 1, hb, 0.15) == doctest::Approx(0.74).epsilon(1e-12));
}

TEST_CASE("online association: per-camera cap") {
  std::mt19937_64 rng(3);
  World two = make_world(40, 6, 2, rng);
  const AssociationParams p{10, 2, 0.15};
  for (const LabeledInstance& li : two.labeled) {
    const AssociationResult r = associate_online(two.data.features.row(li.index), li, two.table, two.bank, p);
    REQUIRE(r.positives.size() == 2);
    CHECK(two.proxy_camera[r.positives[0]] != two.proxy_camera[r.positives[1]]);
  }
  World one = make_world(20, 4, 1, rng);
  const AssociationParams q{10, 3, 0.15};
  for (const LabeledInstance& li : one.labeled)
    CHECK(associate_online(one.data.features.row(li.index), li, one.table, one.bank, q).positives.size() == 1);
}

TEST_CASE("online association: agrees with the two-stage oracle") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    World w = make_world(120, 15, 6, rng);
    for (double wt : {0.15, 1.0}) {
      const AssociationParams p{7, 3, wt};
      for (const LabeledInstance& li : w.labeled) {
        const auto f = w.data.features.row(li.index);
        const AssociationResult r = associate_online(f, li, w.table, w.bank, p);
        const auto expected = oracle::online_positives(f, *li.proxy_index, w.proxy_camera, w.bank, 3, wt);
        CHECK(std::set<std::size_t>(r.positives.begin(), r.positives.end()) == expected);
        std::set<int> cams;
        for (std::size_t j : r.positives) CHECK(cams.insert(w.proxy_camera[j]).second);
        std::vector<double> sims(w.bank.size());
        for (std::size_t j = 0; j < sims.size(); ++j) sims[j] = dot(f, w.bank.entry(j));
        CHECK(r.negatives == oracle::knn(sims, 7, expected));
      }
    }
  }
}

TEST_CASE("merged association: union and negatives") {
  const std::vector<double> f = {1.0, 0.0};
  Matrix e(5, 2);
  for (std::size_t j = 0; j < 5; ++j) e(j, 0) = 1.0 - 0.1 * static_cast<double>(j), e(j, 1) = 0.1 * static_cast<double>(j);
  normalize_rows(e);
  const std::vector<std::vector<std::size_t>> members = {{0}, {1}, {2}, {3}, {4}};
  const MemoryBank bank = MemoryBank::from_partition(e, members, MemoryLevel::proxy, 0.2);
  const AssociationParams p{2, 1, 0.15};
  AssociationResult off{{1, 2}, {}, AssociationMode::offline};
  AssociationResult on{{2, 3}, {}, AssociationMode::online};
  const AssociationResult m = associate_merged(f, off, on, bank, p);
  CHECK(m.positives == std::vector<std::size_t>{1, 2, 3});
  CHECK(m.negatives == std::vector<std::size_t>{0, 4});
  on.positives = {2};
  CHECK(associate_merged(f, off, on, bank, p).positives == off.positives);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    World w = make_world(100, 14, 5, rng);
    const AssociationParams q{6, 3, 0.15};
    for (const LabeledInstance& li : w.labeled) {
      const auto fv = w.data.features.row(li.index);
      const AssociationResult o1 = associate_offline(fv, li, w.table, w.bank, q);
      const AssociationResult o2 = associate_online(fv, li, w.table, w.bank, q);
      const AssociationResult r = associate_merged(fv, o1, o2, w.bank, q);
      std::set<std::size_t> pos(o1.positives.begin(), o1.positives.end());
      pos.insert(o2.positives.begin(), o2.positives.end());
      CHECK(std::set<std::size_t>(r.positives.begin(), r.positives.end()) == pos);
      for (std::size_t j : r.negatives) CHECK_FALSE(pos.count(j));
      CHECK(r.negatives.size() == std::min<std::size_t>(6, w.table.size() - pos.size()));
    }
  }
}
