#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "o2cap/matrix.hpp"

namespace o2cap {

enum class MemoryLevel { cluster, proxy };

/// External memory of per-slot centroids (one per cluster or per proxy).
/// Entries only change through update(); losses treat them as constants.
class MemoryBank {
 public:
  MemoryBank() = default;

  /// entry[j] = normalize(mean of features of members[j]). Throws
  /// InitializationError for an empty slot or a mean with norm < 1e-12.
  static MemoryBank from_partition(const Matrix& features, std::span<const std::vector<std::size_t>> members,
                                   MemoryLevel level, double mu, bool renormalize = true);

  /// Moving average entry <- mu * entry + (1 - mu) * feature, then
  /// re-normalized when enabled. If the blend has norm < 1e-12 the entry is
  /// left unchanged and degeneracies() is incremented.
  void update(std::size_t slot, std::span<const double> feature);

  std::size_t size() const { return entries_.rows(); }
  std::size_t dim() const { return entries_.cols(); }
  std::span<const double> entry(std::size_t slot) const { return entries_.row(slot); }
  const Matrix& entries() const { return entries_; }
  MemoryLevel level() const { return level_; }
  double mu() const { return mu_; }
  bool renormalizes() const { return renormalize_; }
  std::size_t degeneracies() const { return degeneracies_; }

 private:
  Matrix entries_;
  MemoryLevel level_ = MemoryLevel::proxy;
  double mu_ = 0.2;
  bool renormalize_ = true;
  std::size_t degeneracies_ = 0;
};

}  // namespace o2cap
