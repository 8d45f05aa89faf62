#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "o2cap/clustering.hpp"
#include "o2cap/error.hpp"
#include "o2cap/metricspace.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace o2cap;

namespace {

Matrix random_points(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix p(n, 2);
  for (double& v : p.flat()) v = u(rng);
  return p;
}

Matrix euclidean(const Matrix& p) {
  Matrix d(p.rows(), p.rows());
  for (std::size_t i = 0; i < p.rows(); ++i)
    for (std::size_t j = 0; j < p.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < p.cols(); ++k) s += (p(i, k) - p(j, k)) * (p(i, k) - p(j, k));
      d(i, j) = std::sqrt(s);
    }
  return d;
}

ClusterAssignment assignment(std::vector<int> labels) {
  ClusterAssignment a;
  a.num_clusters = *std::max_element(labels.begin(), labels.end());
  a.labels = std::move(labels);
  return a;
}

}  // namespace

TEST_CASE("dbscan: degenerate inputs") {
  const ClusterAssignment blob = dbscan(Matrix(3, 3, 0.0), DbscanParams{0.1, 2});
  CHECK(blob.num_clusters == 1);
  CHECK(blob.labels == std::vector<int>{1, 1, 1});
  const ClusterAssignment lone = dbscan(Matrix(1, 1, 0.0), DbscanParams{0.1, 2});
  CHECK(lone.num_clusters == 0);
  CHECK(lone.labels == std::vector<int>{kOutlier});
  CHECK_THROWS_AS((dbscan(Matrix(2, 3), DbscanParams{})), ShapeError);
  CHECK_THROWS_AS((dbscan(Matrix(2, 2), DbscanParams{0.0, 2})), ParameterError);
  CHECK_THROWS_AS((dbscan(Matrix(2, 2), DbscanParams{0.1, 0})), ParameterError);
}

TEST_CASE("dbscan: three separated blobs") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 0.05);
  const double centres[3][2] = {{0, 0}, {5, 0}, {0, 5}};
  Matrix p(60, 2);
  for (std::size_t i = 0; i < 60; ++i) {
    p(i, 0) = centres[i % 3][0] + g(rng);
    p(i, 1) = centres[i % 3][1] + g(rng);
  }
  const Matrix d = euclidean(p);
  const ClusterAssignment a = dbscan(d, DbscanParams{1.0, 3});
  CHECK(a.num_clusters == 3);
  for (std::size_t i = 0; i < 60; ++i) CHECK(a.labels[i] == static_cast<int>(i % 3) + 1);
  CHECK(a.labels == oracle::dbscan(d, 1.0, 3));
}

TEST_CASE("dbscan: random instances agree with the reachability-closure oracle and survive permutation") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 10 + static_cast<std::size_t>(trial) * 3;
    const Matrix d = euclidean(random_points(n, rng));
    const double eps = 0.05 + 0.01 * (trial % 6);
    const int min_samples = 1 + trial % 5;
    const ClusterAssignment a = dbscan(d, DbscanParams{eps, min_samples});
    CHECK(a.labels == oracle::dbscan(d, eps, min_samples));

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix pd(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) pd(i, j) = d(perm[i], perm[j]);
    const ClusterAssignment b = dbscan(pd, DbscanParams{eps, min_samples});
    // Compare the core-point partitions; border ties may legitimately move.
    std::vector<int> count(n, 0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) count[i] += d(i, j) <= eps;
    std::map<int, int> forward, backward;
    bool consistent = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (count[perm[i]] < min_samples) continue;
      const int la = a.labels[perm[i]], lb = b.labels[i];
      auto [f, fresh_f] = forward.try_emplace(la, lb);
      auto [r, fresh_r] = backward.try_emplace(lb, la);
      consistent = consistent && f->second == lb && r->second == la;
    }
    CHECK(consistent);
    CHECK(a.num_clusters == b.num_clusters);
    for (std::size_t i = 0; i < n; ++i) CHECK((a.labels[perm[i]] == kOutlier) == (b.labels[i] == kOutlier));
  }
}

TEST_CASE("discard_outliers: examples and counting") {
  const RetainedSet r = discard_outliers(assignment({1, kOutlier, 2}));
  CHECK(r.indices == std::vector<std::size_t>{0, 2});
  CHECK(r.labels == std::vector<int>{1, 2});
  CHECK(r.num_clusters == 2);

  const RetainedSet id = discard_outliers(assignment({2, 1, 2}));
  CHECK(id.indices == std::vector<std::size_t>{0, 1, 2});
  CHECK(id.labels == std::vector<int>{2, 1, 2});

  // a cluster that lost every member is compacted away
  const RetainedSet gap = discard_outliers(assignment({3, kOutlier, 1, 3}));
  CHECK(gap.labels == std::vector<int>{2, 1, 2});
  CHECK(gap.num_clusters == 2);

  CHECK_THROWS_AS((discard_outliers(ClusterAssignment{{kOutlier, kOutlier}, 0})), EmptyTrainingSetError);

  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> label(1, 12);
  std::bernoulli_distribution outlier(0.2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> labels(100);
    for (int& l : labels) l = outlier(rng) ? kOutlier : label(rng);
    labels[0] = 1;
    const RetainedSet rs = discard_outliers(assignment(labels));
    const auto kept = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int l) { return l != kOutlier; }));
    CHECK(rs.size() == kept);
    std::set<int> used(rs.labels.begin(), rs.labels.end());
    CHECK(static_cast<int>(used.size()) == rs.num_clusters);
    CHECK(*used.begin() == 1);
    CHECK(*used.rbegin() == rs.num_clusters);
    std::set<int> distinct;
    for (int l : labels)
      if (l != kOutlier) distinct.insert(l);
    CHECK(rs.num_clusters == static_cast<int>(distinct.size()));
  }
}

TEST_CASE("split_by_camera: minimal splits and per-camera numbering") {
  const RetainedSet one = discard_outliers(assignment({1, 1, 1}));
  const std::vector<int> cams = {1, 1, 2};
  const ProxyTable t = split_by_camera(one, cams, 2, 3);
  CHECK(t.size() == 2);
  CHECK(t.camera_count(1) == 1);
  CHECK(t.camera_count(2) == 1);
  CHECK(t.camera_offset(2) == 1);
  CHECK(t.proxy(0).members == std::vector<std::size_t>{0, 1});
  CHECK(t.proxies_of_cluster(1) == std::vector<std::size_t>{0, 1});
  CHECK(*t.proxy_of(2) == 1);

  const RetainedSet two = discard_outliers(assignment({1, 2}));
  const std::vector<int> same = {1, 1};
  const ProxyTable u = split_by_camera(two, same, 1, 2);
  REQUIRE(u.size() == 2);
  CHECK(u.proxy(0).label == 1);
  CHECK(u.proxy(1).label == 2);
  CHECK(u.proxy(0).cluster != u.proxy(1).cluster);

  const std::vector<int> bad = {1, 3};
  CHECK_THROWS_AS(split_by_camera(two, bad, 2, 2), LabelError);
  const std::vector<int> zero = {0, 1};
  CHECK_THROWS_AS(split_by_camera(two, zero, 2, 2), LabelError);
}

TEST_CASE("split_by_camera: synthesized data partitions cleanly") {
  SynthesisConfig cfg;
  const Dataset d = synthesize(cfg);
  const ClusterAssignment a = dbscan(plain_distance(d.features), DbscanParams{0.3, 4});
  const RetainedSet r = discard_outliers(a);
  const ProxyTable t = split_by_camera(r, d.cameras, d.num_cameras(), d.size());

  std::size_t total = 0;
  std::set<std::size_t> seen;
  std::map<int, std::set<int>> cameras_of_cluster;
  for (std::size_t i = 0; i < r.size(); ++i) cameras_of_cluster[r.labels[i]].insert(d.cameras[r.indices[i]]);
  std::map<std::size_t, int> label_of;
  for (std::size_t i = 0; i < r.size(); ++i) label_of[r.indices[i]] = r.labels[i];

  for (std::size_t j = 0; j < t.size(); ++j) {
    const Proxy& p = t.proxy(j);
    CHECK(p.index == j);
    CHECK(t.camera_offset(p.camera) + static_cast<std::size_t>(p.label) - 1 == j);
    total += p.members.size();
    for (std::size_t m : p.members) {
      CHECK(seen.insert(m).second);
      CHECK(label_of.at(m) == p.cluster);
      CHECK(d.cameras[m] == p.camera);
      CHECK(*t.proxy_of(m) == j);
    }
  }
  CHECK(total == r.size());
  for (const auto& [y, cams] : cameras_of_cluster) CHECK(t.proxies_of_cluster(y).size() == cams.size());
  CHECK(static_cast<int>(t.size()) >= r.num_clusters);
  for (std::size_t i = 0; i < d.size(); ++i)
    if (a.labels[i] == kOutlier) CHECK_FALSE(t.proxy_of(i).has_value());

  const std::vector<LabeledInstance> lab = label_instances(d, r, t);
  REQUIRE(lab.size() == d.size());
  for (const LabeledInstance& li : lab) {
    if (li.is_outlier()) {
      CHECK_FALSE(li.proxy_index.has_value());
      continue;
    }
    const Proxy& p = t.proxy(*li.proxy_index);
    CHECK(p.cluster == li.global_label);
    CHECK(p.label == li.proxy_label);
    CHECK(p.camera == li.camera);
  }
}

TEST_CASE("split_by_camera: Z equals Y exactly when every cluster is single-camera") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> label(1, 6), cam(1, 4);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<int> labels(40);
    for (int& l : labels) l = label(rng);
    std::vector<int> cams(40);
    const bool single = trial % 2 == 0;
    for (std::size_t i = 0; i < 40; ++i) cams[i] = single ? (labels[i] % 4) + 1 : cam(rng);
    const RetainedSet r = discard_outliers(assignment(labels));
    const ProxyTable t = split_by_camera(r, cams, 4, 40);
    CHECK(static_cast<int>(t.size()) >= r.num_clusters);
    std::map<int, std::set<int>> per;
    for (std::size_t i = 0; i < 40; ++i) per[r.labels[i]].insert(cams[i]);
    bool all_single = true;
    for (const auto& [y, c] : per) all_single = all_single && c.size() == 1;
    CHECK((static_cast<int>(t.size()) == r.num_clusters) == all_single);
  }
}
