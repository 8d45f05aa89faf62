#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "o2cap/association.hpp"
#include "o2cap/clustering.hpp"
#include "o2cap/memory.hpp"

namespace o2cap {

/// Loss value and its Euclidean gradient with respect to the anchor feature.
/// Memory entries are constants; any projection onto the unit sphere is the
/// caller's business.
struct LossOutput {
  double value = 0.0;
  std::vector<double> grad;

  LossOutput& operator+=(const LossOutput& other);
};

struct LossParams {
  double tau = 0.07;

  void validate() const;
};

/// Shared softmax contrast over the memory rows `positives` and `negatives`
/// (S(u) = exp(K[u] . f / tau)):
///   value = -(1/|P|) sum_{u in P} log( S(u) / sum_{j in P u Q} S(j) )
///   grad  = (1/tau) ( sum_j pi_j K[j] - (1/|P|) sum_{u in P} K[u] ),
/// pi being the softmax over P u Q. The log-sum-exp runs over candidates in
/// ascending index order with max subtraction.
/// Throws LossError for an empty P or when P and Q overlap.
LossOutput loss_positive_set(std::span<const double> feature, const MemoryBank& bank,
                             std::span<const std::size_t> positives, std::span<const std::size_t> negatives,
                             const LossParams& params);

/// Cluster-level InfoNCE over every entry of a cluster bank; `slot` is the
/// anchor's cluster (label - 1). Throws LossError when the bank has < 2 entries.
LossOutput loss_base(std::span<const double> feature, const MemoryBank& bank, std::size_t slot,
                     const LossParams& params);

/// Cluster-level InfoNCE restricted to {slot} u hard_negatives. An empty
/// negative list gives a zero loss.
LossOutput loss_base2(std::span<const double> feature, const MemoryBank& bank, std::size_t slot,
                      std::span<const std::size_t> hard_negatives, const LossParams& params);

/// Intra-camera InfoNCE: softmax over the proxies of the anchor's camera only,
/// targeting its own proxy. Zero when the camera holds a single proxy.
LossOutput loss_intra(std::span<const double> feature, const MemoryBank& bank, const ProxyTable& proxies,
                      const LabeledInstance& anchor, const LossParams& params);

/// Offline plus online proxy-level contrast.
LossOutput loss_o2cap(std::span<const double> feature, const MemoryBank& bank, const AssociationResult& offline,
                      const AssociationResult& online, const LossParams& params);

}  // namespace o2cap
