#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "o2cap/clustering.hpp"
#include "o2cap/memory.hpp"

namespace o2cap {

enum class AssociationMode { offline, online, merged };

std::string_view to_string(AssociationMode mode);

/// Positive proxy set (ascending) and hard negatives (most similar first).
struct AssociationResult {
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
  AssociationMode mode = AssociationMode::offline;
};

struct AssociationParams {
  int k1 = 50;        // hard negatives
  int k2 = 3;         // online positives
  double w = 0.15;    // instance-to-proxy weight in the balanced similarity

  /// Throws ConfigError unless k1 >= 1, 1 <= k2 <= num_cameras and w in [0, 1].
  void validate(int num_cameras) const;
};

/// w * (f . K[j]) + (1 - w) * (K[self] . K[j]), where self is the anchor's own proxy.
double balanced_similarity(std::span<const double> feature, std::size_t self_proxy, std::size_t proxy,
                           const MemoryBank& bank, double w);

/// P1: every proxy split from the anchor's cluster. Q1: the k1 proxies most
/// similar to the anchor feature among the rest.
AssociationResult associate_offline(std::span<const double> feature, const LabeledInstance& anchor,
                                    const ProxyTable& proxies, const MemoryBank& bank,
                                    const AssociationParams& params);

/// Camera-aware nearest neighbours: the best proxy of each camera under the
/// balanced similarity, then the top k2 of those per-camera winners as P2.
/// Q2 holds the k1 proxies outside P2 with the highest plain instance-to-proxy
/// similarity. Ties resolve to the lower proxy index.
AssociationResult associate_online(std::span<const double> feature, const LabeledInstance& anchor,
                                   const ProxyTable& proxies, const MemoryBank& bank,
                                   const AssociationParams& params);

/// P3 = P1 u P2; Q3 = k1 most similar proxies outside P3.
AssociationResult associate_merged(std::span<const double> feature, const AssociationResult& offline,
                                   const AssociationResult& online, const MemoryBank& bank,
                                   const AssociationParams& params);

}  // namespace o2cap
