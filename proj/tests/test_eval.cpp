#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "o2cap/error.hpp"
#include "o2cap/eval.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace o2cap;

namespace {

Dataset make(std::vector<std::vector<double>> rows, std::vector<int> cams, std::vector<int> ids) {
  Dataset d;
  for (auto& r : rows) {
    normalize(r);
    d.features.push_row(r);
  }
  d.cameras = std::move(cams);
  d.true_ids = std::move(ids);
  return d;
}

// Coarse random features so ties in similarity actually occur.
Dataset random_split(std::size_t n, int ids, int cams, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> coord(-2, 2), id(1, ids), cam(1, cams);
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> r(4);
    do {
      for (double& v : r) v = coord(rng);
    } while (norm(r) == 0.0);
    normalize(r);
    d.features.push_row(r);
    d.cameras.push_back(cam(rng));
    d.true_ids.push_back(id(rng));
  }
  return d;
}

}  // namespace

TEST_CASE("retrieval: perfect match and a second-rank hit") {
  const Dataset q = make({{1, 0}}, {1}, {7});
  const RetrievalMetrics one = evaluate_retrieval(q, make({{1, 0}}, {2}, {7}));
  CHECK(one.map == 1.0);
  CHECK(one.r1 == 1.0);

  const RetrievalMetrics two = evaluate_retrieval(q, make({{1, 0.1}, {0, 1}}, {2, 2}, {3, 7}));
  CHECK(two.map == 0.5);
  CHECK(two.r1 == 0.0);
  CHECK(two.r5 == 1.0);

  // same id and camera is removed, leaving no valid match
  const RetrievalMetrics junk = evaluate_retrieval(q, make({{1, 0}}, {1}, {7}));
  CHECK(junk.valid_queries == 0);
  CHECK(junk.skipped_queries == 1);
  CHECK(junk.map == 0.0);
}

TEST_CASE("retrieval: random instances match the counting scorer exactly") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const Dataset q = random_split(20, 8, 3, rng);
    const Dataset g = random_split(100, 8, 3, rng);
    const RetrievalMetrics m = evaluate_retrieval(q, g);
    const oracle::Retrieval o = oracle::retrieval(q, g);
    CHECK(m.map == o.map);
    CHECK(m.r1 == o.r1);
    CHECK(m.r5 == o.r5);
    CHECK(m.r10 == o.r10);
    CHECK(m.valid_queries == o.valid);
    CHECK(m.skipped_queries == o.skipped);
    CHECK(m.r1 <= m.r5);
    CHECK(m.r5 <= m.r10);
    const RetrievalMetrics serial = reference::evaluate_retrieval(q, g);
    CHECK(serial.map == m.map);
    CHECK(serial.r10 == m.r10);
  }
}

TEST_CASE("retrieval: gallery permutation leaves the metrics unchanged") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    // continuous features: permutation cannot reorder tied entries
    Dataset q, g;
    q.features = testing::random_unit_rows(15, 6, rng);
    g.features = testing::random_unit_rows(60, 6, rng);
    std::uniform_int_distribution<int> id(1, 5), cam(1, 3);
    for (int i = 0; i < 15; ++i) q.cameras.push_back(cam(rng)), q.true_ids.push_back(id(rng));
    for (int i = 0; i < 60; ++i) g.cameras.push_back(cam(rng)), g.true_ids.push_back(id(rng));
    std::vector<std::size_t> perm(60);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Dataset p{g.features.gather(perm), {}, {}};
    for (std::size_t j : perm) p.cameras.push_back(g.cameras[j]), p.true_ids.push_back(g.true_ids[j]);
    const RetrievalMetrics a = evaluate_retrieval(q, g), b = evaluate_retrieval(q, p);
    CHECK(std::abs(a.map - b.map) < 1e-12);
    CHECK(a.r1 == b.r1);
    CHECK(a.r5 == b.r5);
    CHECK(a.r10 == b.r10);
  }
  CHECK_THROWS_AS((evaluate_retrieval(make({{1, 0}}, {1}, {1}), make({{1, 0, 0}}, {2}, {1}))), ShapeError);
}

TEST_CASE("association stats: identical sets, oracle sets and majority ties") {
  Dataset d;
  d.cameras = {1, 2, 1, 2, 1};
  d.true_ids = {1, 1, 2, 2, 3};
  d.features = Matrix(5, 2, 0.0);
  for (std::size_t i = 0; i < 5; ++i) d.features(i, 0) = 1.0;
  const RetainedSet r = discard_outliers(ClusterAssignment{{1, 1, 2, 2, 2}, 2});
  const ProxyTable t = split_by_camera(r, d.cameras, 2, 5);
  // proxies: cam1 {0} {2,4}; cam2 {1} {3}; the {2,4} tie goes to id 2
  CHECK(proxy_ground_truth(t, d.true_ids) == std::vector<int>{1, 2, 1, 2});

  const std::vector<std::size_t> anchors = {0, 1, 2, 3};
  const std::vector<std::vector<std::size_t>> gt = {{0, 2}, {0, 2}, {1, 3}, {1, 3}};
  const AssociationStats same = association_stats(anchors, gt, gt, t, d.true_ids);
  CHECK(same.iou == 1.0);
  CHECK(same.precision_online == 1.0);
  CHECK(same.recall_online == 1.0);

  const std::vector<std::vector<std::size_t>> half = {{0}, {2}, {1}, {3}};
  const AssociationStats h = association_stats(anchors, gt, half, t, d.true_ids);
  CHECK(h.iou == 0.5);
  CHECK(h.precision_online == 1.0);
  CHECK(h.recall_online == 0.5);
  CHECK(h.recall_union == 1.0);
}

TEST_CASE("association stats: random instances match set enumeration") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 40;
    std::uniform_int_distribution<int> id(1, 6), cam(1, 3), label(1, 8);
    Dataset d;
    d.features = Matrix(n, 2, 0.0);
    ClusterAssignment a;
    for (std::size_t i = 0; i < n; ++i) {
      d.cameras.push_back(cam(rng));
      d.true_ids.push_back(id(rng));
      a.labels.push_back(i < 8 ? static_cast<int>(i) + 1 : label(rng));
    }
    a.num_clusters = 8;
    const RetainedSet r = discard_outliers(a);
    const ProxyTable t = split_by_camera(r, d.cameras, 3, n);
    std::uniform_int_distribution<std::size_t> pick(0, t.size() - 1);
    std::vector<std::size_t> anchors;
    std::vector<std::vector<std::size_t>> off, on;
    for (std::size_t i = 0; i < n; i += 2) {
      anchors.push_back(i);
      std::set<std::size_t> x, y;
      for (int k = 0; k < 3; ++k) x.insert(pick(rng));
      for (int k = 0; k < 2; ++k) y.insert(pick(rng));
      off.emplace_back(x.begin(), x.end());
      on.emplace_back(y.begin(), y.end());
    }
    const AssociationStats s = association_stats(anchors, off, on, t, d.true_ids);

    // majority id per proxy by brute counting
    std::vector<int> owner(t.size());
    for (std::size_t j = 0; j < t.size(); ++j) {
      int best = 0, best_count = -1;
      for (int cand = 1; cand <= 6; ++cand) {
        int c = 0;
        for (std::size_t m : t.proxy(j).members) c += d.true_ids[m] == cand;
        if (c > best_count) best = cand, best_count = c;
      }
      owner[j] = best;
    }
    double iou = 0, po = 0, pn = 0, pu = 0, ro = 0, rn = 0, ru = 0, nr = 0;
    for (std::size_t k = 0; k < anchors.size(); ++k) {
      const std::set<std::size_t> x(off[k].begin(), off[k].end()), y(on[k].begin(), on[k].end());
      std::set<std::size_t> u = x, inter, truth;
      u.insert(y.begin(), y.end());
      for (std::size_t j : x)
        if (y.count(j)) inter.insert(j);
      for (std::size_t j = 0; j < t.size(); ++j)
        if (owner[j] == d.true_ids[anchors[k]]) truth.insert(j);
      auto hits = [&](const std::set<std::size_t>& s2) {
        double h2 = 0;
        for (std::size_t j : s2) h2 += truth.count(j);
        return h2;
      };
      iou += static_cast<double>(inter.size()) / static_cast<double>(u.size());
      po += hits(x) / static_cast<double>(x.size());
      pn += hits(y) / static_cast<double>(y.size());
      pu += hits(u) / static_cast<double>(u.size());
      if (!truth.empty()) {
        nr += 1;
        ro += hits(x) / static_cast<double>(truth.size());
        rn += hits(y) / static_cast<double>(truth.size());
        ru += hits(u) / static_cast<double>(truth.size());
      }
    }
    const double na = static_cast<double>(anchors.size());
    CHECK(s.iou == doctest::Approx(iou / na).epsilon(1e-12));
    CHECK(s.precision_offline == doctest::Approx(po / na).epsilon(1e-12));
    CHECK(s.precision_online == doctest::Approx(pn / na).epsilon(1e-12));
    CHECK(s.precision_union == doctest::Approx(pu / na).epsilon(1e-12));
    CHECK(s.recall_anchors == static_cast<std::size_t>(nr));
    if (nr > 0) {
      CHECK(s.recall_offline == doctest::Approx(ro / nr).epsilon(1e-12));
      CHECK(s.recall_online == doctest::Approx(rn / nr).epsilon(1e-12));
      CHECK(s.recall_union == doctest::Approx(ru / nr).epsilon(1e-12));
    }
    CHECK(s.recall_union >= std::max(s.recall_offline, s.recall_online));
  }
}

TEST_CASE("clustering quality: identity, single blob and the pair-counting oracle") {
  const std::vector<int> truth = {1, 1, 2, 2, 3, 3};
  const ClusteringQuality same = clustering_quality(truth, truth);
  CHECK(same.ari == 1.0);
  CHECK(same.purity == 1.0);

  const std::vector<int> blob(6, 1);
  const std::vector<int> skew = {1, 1, 1, 1, 2, 3};
  CHECK(clustering_quality(blob, skew).purity == doctest::Approx(4.0 / 6.0).epsilon(1e-15));

  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> label(1, 6), id(1, 5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> a(50), b(50);
    for (std::size_t i = 0; i < 50; ++i) {
      a[i] = trial % 2 && i % 7 == 0 ? kOutlier : label(rng);
      b[i] = id(rng);
    }
    const ClusteringQuality q = clustering_quality(a, b);
    CHECK(std::abs(q.ari - oracle::ari(a, b)) < 1e-9);
    std::map<int, std::map<int, int>> table;
    for (std::size_t i = 0; i < 50; ++i)
      if (a[i] != kOutlier) ++table[a[i]][b[i]];
    double purity = 0.0;
    for (const auto& [c, row] : table) {
      int best = 0, total = 0;
      for (const auto& [t, n] : row) best = std::max(best, n), total += n;
      purity += static_cast<double>(best) / total;
    }
    CHECK(std::abs(q.purity - purity / static_cast<double>(table.size())) < 1e-9);
  }
}
