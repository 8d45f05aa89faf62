#include "o2cap/eval.hpp"

#include <algorithm>
#include <iterator>
#include <map>
#include <numeric>

#include "o2cap/error.hpp"
#include "o2cap/metricspace.hpp"

namespace o2cap {

namespace {

struct QueryScore {
  bool valid = false;
  double ap = 0.0;
  std::size_t first_hit = 0;  // 1-based rank of the first true match
};

QueryScore score_query(std::size_t q, std::span<const double> sims, const Dataset& query, const Dataset& gallery) {
  const int qid = query.true_ids[q];
  const int qcam = query.cameras[q];
  std::vector<std::size_t> order;
  order.reserve(gallery.size());
  for (std::size_t g = 0; g < gallery.size(); ++g) {
    if (gallery.true_ids[g] == qid && gallery.cameras[g] == qcam) continue;  // junk
    order.push_back(g);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sims[a] > sims[b] || (sims[a] == sims[b] && a < b);
  });
  QueryScore s;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (gallery.true_ids[order[r]] != qid) continue;
    ++hits;
    if (hits == 1) s.first_hit = r + 1;
    s.ap += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  if (hits == 0) return s;
  s.valid = true;
  s.ap /= static_cast<double>(hits);
  return s;
}

RetrievalMetrics reduce(std::span<const QueryScore> scores) {
  RetrievalMetrics m;
  for (const auto& s : scores) {
    if (!s.valid) {
      ++m.skipped_queries;
      continue;
    }
    ++m.valid_queries;
    m.map += s.ap;
    m.r1 += s.first_hit <= 1 ? 1.0 : 0.0;
    m.r5 += s.first_hit <= 5 ? 1.0 : 0.0;
    m.r10 += s.first_hit <= 10 ? 1.0 : 0.0;
  }
  if (m.valid_queries > 0) {
    const auto n = static_cast<double>(m.valid_queries);
    m.map /= n;
    m.r1 /= n;
    m.r5 /= n;
    m.r10 /= n;
  }
  return m;
}

void check_retrieval_inputs(const Dataset& query, const Dataset& gallery) {
  if (query.dim() != gallery.dim()) throw ShapeError("evaluate_retrieval: dimension mismatch");
  if (!query.has_ground_truth() || !gallery.has_ground_truth())
    throw LabelError("evaluate_retrieval: ground-truth ids are required");
}

}  // namespace

RetrievalMetrics evaluate_retrieval(const Dataset& query, const Dataset& gallery) {
  check_retrieval_inputs(query, gallery);
  const Matrix sims = cosine_matrix(query.features, gallery.features);
  std::vector<QueryScore> scores(query.size());
  const auto nq = static_cast<std::ptrdiff_t>(query.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t q = 0; q < nq; ++q) {
    const auto i = static_cast<std::size_t>(q);
    scores[i] = score_query(i, sims.row(i), query, gallery);
  }
  return reduce(scores);
}

namespace reference {

RetrievalMetrics evaluate_retrieval(const Dataset& query, const Dataset& gallery) {
  check_retrieval_inputs(query, gallery);
  const Matrix sims = reference::cosine_matrix(query.features, gallery.features);
  std::vector<QueryScore> scores;
  scores.reserve(query.size());
  for (std::size_t q = 0; q < query.size(); ++q) scores.push_back(score_query(q, sims.row(q), query, gallery));
  return reduce(scores);
}

}  // namespace reference

std::vector<int> proxy_ground_truth(const ProxyTable& proxies, std::span<const int> true_ids) {
  std::vector<int> out;
  out.reserve(proxies.size());
  for (const Proxy& p : proxies.proxies()) {
    std::map<int, std::size_t> counts;  // ascending id, so the first maximum is the lowest id
    for (std::size_t m : p.members) ++counts[true_ids[m]];
    int best = kUnknownId;
    std::size_t best_count = 0;
    for (const auto& [id, c] : counts) {
      if (c > best_count) {
        best = id;
        best_count = c;
      }
    }
    out.push_back(best);
  }
  return out;
}

AssociationStats association_stats(std::span<const std::size_t> anchors,
                                   std::span<const std::vector<std::size_t>> offline_positives,
                                   std::span<const std::vector<std::size_t>> online_positives,
                                   const ProxyTable& proxies, std::span<const int> true_ids) {
  if (offline_positives.size() != anchors.size() || online_positives.size() != anchors.size())
    throw ShapeError("association_stats: per-anchor sets must parallel the anchor list");
  const auto gt = proxy_ground_truth(proxies, true_ids);
  AssociationStats s;
  s.anchors = anchors.size();
  if (anchors.empty()) return s;

  auto count_in = [](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    std::vector<std::size_t> tmp;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(tmp));
    return static_cast<double>(tmp.size());
  };
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    const int id = true_ids[anchors[k]];
    std::vector<std::size_t> truth;
    for (std::size_t j = 0; j < gt.size(); ++j)
      if (gt[j] == id) truth.push_back(j);
    std::vector<std::size_t> off = offline_positives[k];
    std::vector<std::size_t> on = online_positives[k];
    std::sort(off.begin(), off.end());
    std::sort(on.begin(), on.end());
    std::vector<std::size_t> uni;
    std::set_union(off.begin(), off.end(), on.begin(), on.end(), std::back_inserter(uni));

    s.iou += uni.empty() ? 0.0 : count_in(off, on) / static_cast<double>(uni.size());
    if (!off.empty()) s.precision_offline += count_in(off, truth) / static_cast<double>(off.size());
    if (!on.empty()) s.precision_online += count_in(on, truth) / static_cast<double>(on.size());
    if (!uni.empty()) s.precision_union += count_in(uni, truth) / static_cast<double>(uni.size());
    if (!truth.empty()) {
      ++s.recall_anchors;
      const auto t = static_cast<double>(truth.size());
      s.recall_offline += count_in(off, truth) / t;
      s.recall_online += count_in(on, truth) / t;
      s.recall_union += count_in(uni, truth) / t;
    }
  }
  const auto n = static_cast<double>(anchors.size());
  s.iou /= n;
  s.precision_offline /= n;
  s.precision_online /= n;
  s.precision_union /= n;
  if (s.recall_anchors > 0) {
    const auto r = static_cast<double>(s.recall_anchors);
    s.recall_offline /= r;
    s.recall_online /= r;
    s.recall_union /= r;
  }
  return s;
}

ClusteringQuality clustering_quality(std::span<const int> labels, std::span<const int> true_ids) {
  if (labels.size() != true_ids.size()) throw ShapeError("clustering_quality: length mismatch");
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> by_cluster, by_id;
  double n = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kOutlier) continue;
    joint[{labels[i], true_ids[i]}] += 1.0;
    by_cluster[labels[i]] += 1.0;
    by_id[true_ids[i]] += 1.0;
    n += 1.0;
  }
  ClusteringQuality q;
  if (n == 0.0) return q;
  auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
  double sum_joint = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [key, c] : joint) sum_joint += pairs(c);
  for (const auto& [key, c] : by_cluster) sum_a += pairs(c);
  for (const auto& [key, c] : by_id) sum_b += pairs(c);
  const double expected = n > 1.0 ? sum_a * sum_b / pairs(n) : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  q.ari = max_index == expected ? 1.0 : (sum_joint - expected) / (max_index - expected);

  std::map<int, double> best;
  for (const auto& [key, c] : joint) best[key.first] = std::max(best[key.first], c);
  double purity = 0.0;
  for (const auto& [label, size] : by_cluster) purity += best[label] / size;
  q.purity = purity / static_cast<double>(by_cluster.size());
  return q;
}

}  // namespace o2cap
