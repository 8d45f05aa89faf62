#include "o2cap/memory.hpp"

#include <string>

#include "o2cap/error.hpp"

namespace o2cap {

MemoryBank MemoryBank::from_partition(const Matrix& features, std::span<const std::vector<std::size_t>> members,
                                      MemoryLevel level, double mu, bool renormalize) {
  if (!(mu >= 0.0 && mu <= 1.0)) throw ParameterError("memory: mu must lie in [0, 1]");
  MemoryBank bank;
  bank.level_ = level;
  bank.mu_ = mu;
  bank.renormalize_ = renormalize;
  bank.entries_ = Matrix(members.size(), features.cols());
  for (std::size_t j = 0; j < members.size(); ++j) {
    if (members[j].empty()) throw InitializationError("memory: slot " + std::to_string(j) + " has no members");
    auto e = bank.entries_.row(j);
    for (std::size_t i : members[j]) {
      const auto f = features.row(i);
      for (std::size_t k = 0; k < e.size(); ++k) e[k] += f[k];
    }
    for (double& x : e) x /= static_cast<double>(members[j].size());
    if (normalize(e) < 1e-12)
      throw InitializationError("memory: members of slot " + std::to_string(j) + " average to zero");
  }
  return bank;
}

void MemoryBank::update(std::size_t slot, std::span<const double> feature) {
  if (slot >= size()) throw ParameterError("memory: slot " + std::to_string(slot) + " out of range");
  if (feature.size() != dim()) throw ShapeError("memory: feature dimension mismatch");
  auto e = entries_.row(slot);
  std::vector<double> blended(e.size());
  for (std::size_t k = 0; k < e.size(); ++k) blended[k] = mu_ * e[k] + (1.0 - mu_) * feature[k];
  if (renormalize_) {
    if (normalize(blended) < 1e-12) {
      ++degeneracies_;
      return;
    }
  }
  std::copy(blended.begin(), blended.end(), e.begin());
}

}  // namespace o2cap
