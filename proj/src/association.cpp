#include "o2cap/association.hpp"

#include <algorithm>
#include <iterator>
#include <string>

#include "o2cap/error.hpp"
#include "o2cap/metricspace.hpp"

namespace o2cap {

std::string_view to_string(AssociationMode mode) {
  switch (mode) {
    case AssociationMode::offline: return "offline";
    case AssociationMode::online: return "online";
    case AssociationMode::merged: return "merged";
  }
  return "unknown";
}

void AssociationParams::validate(int num_cameras) const {
  if (k1 < 1) throw ConfigError("association: k1 must be >= 1");
  if (k2 < 1) throw ConfigError("association: k2 must be >= 1");
  if (k2 > num_cameras)
    throw ConfigError("association: k2 (" + std::to_string(k2) + ") exceeds the camera count (" +
                      std::to_string(num_cameras) + ")");
  if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("association: w must lie in [0, 1]");
}

double balanced_similarity(std::span<const double> feature, std::size_t self_proxy, std::size_t proxy,
                           const MemoryBank& bank, double w) {
  const auto target = bank.entry(proxy);
  return w * dot(feature, target) + (1.0 - w) * dot(bank.entry(self_proxy), target);
}

namespace {

std::vector<double> instance_similarities(std::span<const double> feature, const MemoryBank& bank) {
  std::vector<double> sims(bank.size());
  for (std::size_t j = 0; j < bank.size(); ++j) sims[j] = dot(feature, bank.entry(j));
  return sims;
}

void require_trainable(const LabeledInstance& anchor) {
  if (anchor.is_outlier() || !anchor.proxy_index)
    throw LabelError("association: anchor " + std::to_string(anchor.index) + " is an outlier");
}

}  // namespace

AssociationResult associate_offline(std::span<const double> feature, const LabeledInstance& anchor,
                                    const ProxyTable& proxies, const MemoryBank& bank,
                                    const AssociationParams& params) {
  require_trainable(anchor);
  AssociationResult out;
  out.mode = AssociationMode::offline;
  out.positives = proxies.proxies_of_cluster(anchor.global_label);
  const auto sims = instance_similarities(feature, bank);
  out.negatives = knn(sims, static_cast<std::size_t>(params.k1), out.positives);
  return out;
}

AssociationResult associate_online(std::span<const double> feature, const LabeledInstance& anchor,
                                   const ProxyTable& proxies, const MemoryBank& bank,
                                   const AssociationParams& params) {
  require_trainable(anchor);
  const std::size_t self = *anchor.proxy_index;
  const auto sims = instance_similarities(feature, bank);

  struct Champion {
    std::size_t proxy;
    double score;
  };
  std::vector<Champion> champions;
  for (int c = 1; c <= proxies.num_cameras(); ++c) {
    const std::size_t begin = proxies.camera_offset(c);
    const std::size_t end = begin + proxies.camera_count(c);
    if (begin == end) continue;
    Champion best{begin, -1e300};
    for (std::size_t j = begin; j < end; ++j) {
      const double s = balanced_similarity(feature, self, j, bank, params.w);
      if (s > best.score) best = {j, s};  // strict: the lowest index wins ties
    }
    champions.push_back(best);
  }
  const std::size_t take = std::min(champions.size(), static_cast<std::size_t>(params.k2));
  std::partial_sort(champions.begin(), champions.begin() + static_cast<std::ptrdiff_t>(take), champions.end(),
                    [](const Champion& a, const Champion& b) {
                      return a.score > b.score || (a.score == b.score && a.proxy < b.proxy);
                    });

  AssociationResult out;
  out.mode = AssociationMode::online;
  for (std::size_t k = 0; k < take; ++k) out.positives.push_back(champions[k].proxy);
  std::sort(out.positives.begin(), out.positives.end());
  out.negatives = knn(sims, static_cast<std::size_t>(params.k1), out.positives);
  return out;
}

AssociationResult associate_merged(std::span<const double> feature, const AssociationResult& offline,
                                   const AssociationResult& online, const MemoryBank& bank,
                                   const AssociationParams& params) {
  AssociationResult out;
  out.mode = AssociationMode::merged;
  std::set_union(offline.positives.begin(), offline.positives.end(), online.positives.begin(),
                 online.positives.end(), std::back_inserter(out.positives));
  const auto sims = instance_similarities(feature, bank);
  out.negatives = knn(sims, static_cast<std::size_t>(params.k1), out.positives);
  return out;
}

}  // namespace o2cap
