#include "o2cap/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "o2cap/error.hpp"

namespace o2cap {

LossOutput& LossOutput::operator+=(const LossOutput& other) {
  value += other.value;
  if (grad.empty()) grad.assign(other.grad.size(), 0.0);
  for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += other.grad[k];
  return *this;
}

void LossParams::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("loss: tau must be finite and > 0");
}

LossOutput loss_positive_set(std::span<const double> feature, const MemoryBank& bank,
                             std::span<const std::size_t> positives, std::span<const std::size_t> negatives,
                             const LossParams& params) {
  if (positives.empty()) throw LossError("loss: positive set is empty");
  if (feature.size() != bank.dim()) throw ShapeError("loss: feature dimension mismatch");

  struct Candidate {
    std::size_t slot;
    bool positive;
  };
  std::vector<Candidate> cands;
  cands.reserve(positives.size() + negatives.size());
  for (std::size_t p : positives) cands.push_back({p, true});
  for (std::size_t q : negatives) cands.push_back({q, false});
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.slot < b.slot; });
  for (std::size_t k = 1; k < cands.size(); ++k) {
    if (cands[k].slot == cands[k - 1].slot) throw LossError("loss: positive and negative sets overlap");
  }
  for (const auto& c : cands)
    if (c.slot >= bank.size()) throw LossError("loss: memory index out of range");

  std::vector<double> logits(cands.size());
  for (std::size_t k = 0; k < cands.size(); ++k) logits[k] = dot(bank.entry(cands[k].slot), feature) / params.tau;
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double l : logits) total += std::exp(l - top);
  const double lse = top + std::log(total);

  const double inv_p = 1.0 / static_cast<double>(positives.size());
  LossOutput out;
  out.grad.assign(feature.size(), 0.0);
  double pos_mean = 0.0;
  for (std::size_t k = 0; k < cands.size(); ++k) {
    const double pi = std::exp(logits[k] - lse);
    const double coeff = cands[k].positive ? pi - inv_p : pi;
    if (cands[k].positive) pos_mean += logits[k];
    const auto e = bank.entry(cands[k].slot);
    for (std::size_t d = 0; d < out.grad.size(); ++d) out.grad[d] += coeff * e[d];
  }
  for (double& g : out.grad) g /= params.tau;
  out.value = std::max(0.0, lse - pos_mean * inv_p);
  return out;
}

LossOutput loss_base(std::span<const double> feature, const MemoryBank& bank, std::size_t slot,
                     const LossParams& params) {
  if (bank.size() < 2) throw LossError("loss_base: need at least two clusters");
  std::vector<std::size_t> others;
  others.reserve(bank.size() - 1);
  for (std::size_t j = 0; j < bank.size(); ++j)
    if (j != slot) others.push_back(j);
  const std::size_t target[] = {slot};
  return loss_positive_set(feature, bank, target, others, params);
}

LossOutput loss_base2(std::span<const double> feature, const MemoryBank& bank, std::size_t slot,
                      std::span<const std::size_t> hard_negatives, const LossParams& params) {
  const std::size_t target[] = {slot};
  return loss_positive_set(feature, bank, target, hard_negatives, params);
}

LossOutput loss_intra(std::span<const double> feature, const MemoryBank& bank, const ProxyTable& proxies,
                      const LabeledInstance& anchor, const LossParams& params) {
  if (!anchor.proxy_index) throw LossError("loss_intra: anchor has no proxy");
  const std::size_t begin = proxies.camera_offset(anchor.camera);
  const std::size_t count = proxies.camera_count(anchor.camera);
  const std::size_t target[] = {*anchor.proxy_index};
  std::vector<std::size_t> others;
  for (std::size_t j = begin; j < begin + count; ++j)
    if (j != target[0]) others.push_back(j);
  return loss_positive_set(feature, bank, target, others, params);
}

LossOutput loss_o2cap(std::span<const double> feature, const MemoryBank& bank, const AssociationResult& offline,
                      const AssociationResult& online, const LossParams& params) {
  if (offline.mode != AssociationMode::offline || online.mode != AssociationMode::online)
    throw LossError("loss_o2cap: expects one offline and one online association");
  LossOutput out = loss_positive_set(feature, bank, offline.positives, offline.negatives, params);
  out += loss_positive_set(feature, bank, online.positives, online.negatives, params);
  return out;
}

}  // namespace o2cap
