#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "o2cap/clustering.hpp"
#include "o2cap/dataset.hpp"

namespace o2cap {

struct RetrievalMetrics {
  double map = 0.0;
  double r1 = 0.0;
  double r5 = 0.0;
  double r10 = 0.0;
  std::size_t valid_queries = 0;
  std::size_t skipped_queries = 0;  // no cross-camera match in the gallery
};

/// Cross-camera retrieval by cosine similarity, no re-ranking. Gallery
/// entries sharing both id and camera with the query are removed from the
/// ranking. AP is the mean precision at each true match; queries without any
/// match are skipped and counted. Ties rank by ascending gallery index.
RetrievalMetrics evaluate_retrieval(const Dataset& query, const Dataset& gallery);

struct AssociationStats {
  double iou = 0.0;
  double precision_offline = 0.0;
  double precision_online = 0.0;
  double precision_union = 0.0;
  double recall_offline = 0.0;
  double recall_online = 0.0;
  double recall_union = 0.0;
  std::size_t anchors = 0;
  std::size_t recall_anchors = 0;  // anchors whose ground-truth proxy set is non-empty
};

/// Majority ground-truth id of each proxy's members, ties to the lowest id.
std::vector<int> proxy_ground_truth(const ProxyTable& proxies, std::span<const int> true_ids);

/// IoU of offline/online positives, and precision/recall of offline, online
/// and union positives against the proxies whose majority id matches the
/// anchor's id. `anchors` lists dataset indices parallel to the positive sets.
/// Recall averages over anchors with a non-empty ground-truth set.
AssociationStats association_stats(std::span<const std::size_t> anchors,
                                   std::span<const std::vector<std::size_t>> offline_positives,
                                   std::span<const std::vector<std::size_t>> online_positives,
                                   const ProxyTable& proxies, std::span<const int> true_ids);

struct ClusteringQuality {
  double ari = 0.0;
  double purity = 0.0;
};

/// Adjusted Rand index over non-outliers, and unweighted mean of per-cluster
/// purity (largest id share).
ClusteringQuality clustering_quality(std::span<const int> labels, std::span<const int> true_ids);

namespace reference {

/// Serial twin of o2cap::evaluate_retrieval.
RetrievalMetrics evaluate_retrieval(const Dataset& query, const Dataset& gallery);

}  // namespace reference

}  // namespace o2cap
