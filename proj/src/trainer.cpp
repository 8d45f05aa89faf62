#include "o2cap/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <unordered_map>

#include "o2cap/error.hpp"

namespace o2cap {

namespace {

constexpr std::pair<LossMode, std::string_view> kLossNames[] = {
    {LossMode::base, "base"}, {LossMode::base2, "base2"}, {LossMode::off, "off"},   {LossMode::on, "on"},
    {LossMode::o2cap, "o2cap"}, {LossMode::merge, "merge"}, {LossMode::cap, "cap"},
};

constexpr std::pair<Sampling, std::string_view> kSamplingNames[] = {
    {Sampling::automatic, "auto"}, {Sampling::proxy, "proxy"}, {Sampling::cluster, "cluster"}};

std::mt19937_64 seeded_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x6f32u};
  return std::mt19937_64(seq);
}

bool cluster_level(LossMode mode) { return mode == LossMode::base || mode == LossMode::base2; }

}  // namespace

std::string_view to_string(LossMode mode) {
  for (const auto& [m, name] : kLossNames)
    if (m == mode) return name;
  return "unknown";
}

LossMode parse_loss_mode(std::string_view name) {
  for (const auto& [m, n] : kLossNames)
    if (n == name) return m;
  throw ConfigError("unknown loss mode '" + std::string(name) + "' (base|base2|off|on|o2cap|merge|cap)");
}

std::string_view to_string(Sampling s) {
  for (const auto& [m, name] : kSamplingNames)
    if (m == s) return name;
  return "unknown";
}

Sampling parse_sampling(std::string_view name) {
  for (const auto& [m, n] : kSamplingNames)
    if (n == name) return m;
  throw ConfigError("unknown sampling '" + std::string(name) + "' (auto|proxy|cluster)");
}

void TrainConfig::validate(int num_cameras) const {
  if (max_epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (iters_per_epoch < 0) throw ConfigError("train: iters_per_epoch must be >= 0");
  if (batch_proxies < 1 || batch_instances < 1) throw ConfigError("train: batch P and K must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train: lr must be finite and >= 0");
  if (warmup_epochs < -1) throw ConfigError("train: warmup_epochs must be >= 0 (or -1 for auto)");
  if (decay_every < -1) throw ConfigError("train: decay_every must be >= 0 (or -1 for auto)");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw ConfigError("train: decay_factor must lie in (0, 1]");
  if (!(mu >= 0.0 && mu < 1.0)) throw ConfigError("memory: mu must lie in [0, 1)");
  if (eval_neighbors < 1) throw ConfigError("eval: neighbors must be >= 1");
  loss.validate();
  try {
    dbscan.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  if (jaccard.k1 < 1 || jaccard.k2 < 1 || jaccard.k2 > jaccard.k1)
    throw ConfigError("jaccard: need 1 <= k2 <= k1");
  if (!(jaccard.lambda >= 0.0 && jaccard.lambda <= 1.0)) throw ConfigError("jaccard: lambda must lie in [0, 1]");
  if (assoc.k2 < 0) throw ConfigError("association: k2 must be >= 1 (or 0 for auto)");
  AssociationParams probe = assoc;
  if (probe.k2 == 0) probe.k2 = 1;
  probe.validate(num_cameras > 0 ? num_cameras : std::max(probe.k2, 1));
}

int default_k2(const Dataset& data) {
  if (!data.has_ground_truth() || data.size() == 0) return 1;
  std::map<int, std::set<int>> cams;
  for (std::size_t i = 0; i < data.size(); ++i) cams[data.true_ids[i]].insert(data.cameras[i]);
  double total = 0.0;
  for (const auto& [id, c] : cams) total += static_cast<double>(c.size());
  const int cid = static_cast<int>(std::lround(total / static_cast<double>(cams.size())));
  return std::clamp(cid - 1, 1, std::max(1, data.num_cameras()));
}

double learning_rate(const TrainConfig& cfg, int epoch) {
  const int warmup =
      cfg.warmup_epochs >= 0 ? cfg.warmup_epochs : static_cast<int>(std::lround(cfg.max_epochs / 5.0));
  const int step = cfg.decay_every >= 0 ? cfg.decay_every
                                        : std::max(1, static_cast<int>(std::lround(2.0 * cfg.max_epochs / 5.0)));
  if (epoch < warmup) return cfg.lr * static_cast<double>(epoch + 1) / static_cast<double>(warmup);
  if (step == 0) return cfg.lr;
  return cfg.lr * std::pow(cfg.decay_factor, epoch / step);
}

EmbeddingModel EmbeddingModel::from_inputs(const Dataset& data) { return EmbeddingModel{data.features}; }

Matrix EmbeddingModel::extend(const Matrix& train_inputs, const Matrix& unseen, int neighbors) const {
  if (train_inputs.rows() != table.rows()) throw ShapeError("extend: table and training inputs differ in size");
  const Matrix sims = cosine_matrix(unseen, train_inputs);
  Matrix out(unseen.rows(), table.cols(), 0.0);
  const auto n = static_cast<std::ptrdiff_t>(unseen.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t q = 0; q < n; ++q) {
    const auto i = static_cast<std::size_t>(q);
    auto row = out.row(i);
    for (std::size_t j : knn(sims.row(i), static_cast<std::size_t>(neighbors))) {
      const auto t = table.row(j);
      for (std::size_t d = 0; d < row.size(); ++d) row[d] += t[d];
    }
    normalize(row);
  }
  return out;
}

Batch sample_batch(std::span<const std::vector<std::size_t>> groups, int group_count, int per_group,
                   std::mt19937_64& rng) {
  Batch b;
  const std::size_t want = static_cast<std::size_t>(group_count);
  const std::size_t take = std::min(want, groups.size());
  b.shrunk = take < want;

  std::vector<std::size_t> pool(groups.size());
  for (std::size_t g = 0; g < pool.size(); ++g) pool[g] = g;
  for (std::size_t k = 0; k < take; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
    std::swap(pool[k], pool[pick(rng)]);
    b.groups.push_back(pool[k]);
  }

  const auto k_per = static_cast<std::size_t>(per_group);
  for (std::size_t g : b.groups) {
    const auto& members = groups[g];
    if (members.size() >= k_per) {
      std::vector<std::size_t> m = members;
      for (std::size_t k = 0; k < k_per; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, m.size() - 1);
        std::swap(m[k], m[pick(rng)]);
        b.anchors.push_back(m[k]);
      }
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
      for (std::size_t k = 0; k < k_per; ++k) b.anchors.push_back(members[pick(rng)]);
    }
  }
  return b;
}

EpochAssociations collect_associations(const EmbeddingModel& model, const std::vector<LabeledInstance>& labels,
                                       const RetainedSet& retained, const ProxyTable& proxies,
                                       const MemoryBank& bank, const AssociationParams& params) {
  EpochAssociations out;
  out.anchors = retained.indices;
  out.offline.resize(out.anchors.size());
  out.online.resize(out.anchors.size());
  const auto n = static_cast<std::ptrdiff_t>(out.anchors.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const auto a = static_cast<std::size_t>(k);
    const LabeledInstance& inst = labels[out.anchors[a]];
    out.offline[a] = proxies.proxies_of_cluster(inst.global_label);
    out.online[a] = associate_online(model.table.row(inst.index), inst, proxies, bank, params).positives;
  }
  return out;
}

Partition build_partition(const Matrix& features, const Dataset& data, const TrainConfig& cfg) {
  Partition p;
  Matrix dist;
  if (cfg.use_jaccard) {
    // Small inputs cannot host the configured neighbourhoods; shrink them to fit.
    JaccardParams jp = cfg.jaccard;
    if (features.rows() < 2) throw EmptyTrainingSetError("clustering: need at least two instances");
    jp.k1 = std::min<int>(jp.k1, static_cast<int>(features.rows()) - 1);
    jp.k2 = std::min(jp.k2, jp.k1);
    dist = jaccard_distance(features, jp);
  } else {
    dist = plain_distance(features);
  }
  p.assignment = dbscan(dist, cfg.dbscan);
  p.retained = discard_outliers(p.assignment);
  p.proxies = split_by_camera(p.retained, data.cameras, data.num_cameras(), data.size());
  p.labels = label_instances(data, p.retained, p.proxies);
  return p;
}

Trainer::Trainer(const Dataset& data, TrainConfig cfg)
    : data_(data), cfg_(std::move(cfg)), model_(EmbeddingModel::from_inputs(data)), rng_(seeded_rng(cfg_.rng_seed)) {
  if (cfg_.assoc.k2 == 0) cfg_.assoc.k2 = default_k2(data);
  cfg_.validate(data.num_cameras());
}

bool Trainer::uses_cluster_bank() const { return cluster_level(cfg_.loss_mode); }

Sampling Trainer::effective_sampling() const {
  if (cfg_.sampling != Sampling::automatic) return cfg_.sampling;
  return uses_cluster_bank() ? Sampling::cluster : Sampling::proxy;
}

EpochReport Trainer::train_epoch() {
  EpochReport report;
  report.epoch = epoch_ + 1;
  report.lr = learning_rate(cfg_, epoch_);

  const Partition part = build_partition(model_.table, data_, cfg_);
  report.retained = part.retained.size();
  report.outliers = data_.size() - part.retained.size();
  report.clusters = part.retained.num_clusters;
  report.proxies = part.proxies.size();
  if (data_.has_ground_truth()) report.clustering = clustering_quality(part.assignment.labels, data_.true_ids);

  const auto cluster_groups = cluster_members(part.retained);
  const auto proxy_groups = part.proxies.members();
  const bool by_cluster = uses_cluster_bank();
  MemoryBank bank =
      MemoryBank::from_partition(model_.table, by_cluster ? cluster_groups : proxy_groups,
                                 by_cluster ? MemoryLevel::cluster : MemoryLevel::proxy, cfg_.mu,
                                 cfg_.renormalize_memory);

  const MemoryBank epoch_bank = cfg_.online_epoch_snapshot ? bank : MemoryBank{};
  const EpochContext ctx{report.epoch, &part.retained, &part.proxies, &part.labels};
  if (observer_) observer_->on_epoch_begin(ctx);

  const auto& groups = effective_sampling() == Sampling::cluster ? cluster_groups : proxy_groups;
  const auto batch_size = static_cast<std::size_t>(cfg_.batch_size());
  const int iters = cfg_.iters_per_epoch > 0
                        ? cfg_.iters_per_epoch
                        : static_cast<int>((part.retained.size() + batch_size - 1) / batch_size);

  const LossMode mode = cfg_.loss_mode;
  const bool need_off = mode == LossMode::off || mode == LossMode::o2cap || mode == LossMode::merge ||
                        mode == LossMode::cap;
  const bool need_on = mode == LossMode::on || mode == LossMode::o2cap || mode == LossMode::merge;
  const bool need_merged = mode == LossMode::merge;

  double loss_total = 0.0;
  for (int it = 0; it < iters; ++it) {
    const Batch batch = sample_batch(groups, cfg_.batch_proxies, cfg_.batch_instances, rng_);
    report.batch_shrunk = report.batch_shrunk || batch.shrunk;
    const std::size_t b = batch.anchors.size();

    // Forward features, captured before the step; memory updates use these.
    Matrix forward(b, model_.table.cols());
    for (std::size_t k = 0; k < b; ++k) std::copy_n(model_.table.row(batch.anchors[k]).begin(), forward.cols(),
                                                    forward.row(k).begin());

    const MemoryBank& online_bank = cfg_.online_epoch_snapshot ? epoch_bank : bank;
    std::vector<LossOutput> losses(b);
    std::vector<AssociationResult> off(need_off ? b : 0), on(need_on ? b : 0), merged(need_merged ? b : 0);
    const auto nb = static_cast<std::ptrdiff_t>(b);
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t kk = 0; kk < nb; ++kk) {
      const auto k = static_cast<std::size_t>(kk);
      const LabeledInstance& a = part.labels[batch.anchors[k]];
      const auto f = forward.row(k);
      switch (mode) {
        case LossMode::base:
          losses[k] = loss_base(f, bank, static_cast<std::size_t>(a.global_label - 1), cfg_.loss);
          break;
        case LossMode::base2: {
          const std::size_t slot = static_cast<std::size_t>(a.global_label - 1);
          std::vector<double> sims(bank.size());
          for (std::size_t j = 0; j < bank.size(); ++j) sims[j] = dot(f, bank.entry(j));
          const std::size_t self[] = {slot};
          const auto hard = knn(sims, static_cast<std::size_t>(cfg_.assoc.k1), self);
          losses[k] = loss_base2(f, bank, slot, hard, cfg_.loss);
          break;
        }
        case LossMode::off:
          off[k] = associate_offline(f, a, part.proxies, bank, cfg_.assoc);
          losses[k] = loss_positive_set(f, bank, off[k].positives, off[k].negatives, cfg_.loss);
          break;
        case LossMode::on:
          on[k] = associate_online(f, a, part.proxies, online_bank, cfg_.assoc);
          losses[k] = loss_positive_set(f, bank, on[k].positives, on[k].negatives, cfg_.loss);
          break;
        case LossMode::o2cap:
          off[k] = associate_offline(f, a, part.proxies, bank, cfg_.assoc);
          on[k] = associate_online(f, a, part.proxies, online_bank, cfg_.assoc);
          losses[k] = loss_o2cap(f, bank, off[k], on[k], cfg_.loss);
          break;
        case LossMode::merge:
          off[k] = associate_offline(f, a, part.proxies, bank, cfg_.assoc);
          on[k] = associate_online(f, a, part.proxies, online_bank, cfg_.assoc);
          merged[k] = associate_merged(f, off[k], on[k], bank, cfg_.assoc);
          losses[k] = loss_positive_set(f, bank, merged[k].positives, merged[k].negatives, cfg_.loss);
          break;
        case LossMode::cap:
          off[k] = associate_offline(f, a, part.proxies, bank, cfg_.assoc);
          losses[k] = loss_intra(f, bank, part.proxies, a, cfg_.loss);
          losses[k] += loss_positive_set(f, bank, off[k].positives, off[k].negatives, cfg_.loss);
          break;
      }
    }

    if (observer_) {
      BatchTrace trace{report.epoch, it, &batch, &part.proxies, &part.labels, &bank, off, on, merged};
      observer_->on_batch(trace);
    }

    // Batch-mean loss; gradients of repeated rows accumulate in anchor order.
    const double inv_b = 1.0 / static_cast<double>(b);
    double batch_loss = 0.0;
    std::vector<std::size_t> rows;
    std::unordered_map<std::size_t, std::vector<double>> grads;
    for (std::size_t k = 0; k < b; ++k) {
      batch_loss += losses[k].value;
      auto [pos, fresh] = grads.try_emplace(batch.anchors[k], forward.cols(), 0.0);
      if (fresh) rows.push_back(batch.anchors[k]);
      for (std::size_t d = 0; d < forward.cols(); ++d) pos->second[d] += losses[k].grad[d] * inv_b;
    }
    loss_total += batch_loss * inv_b;

    // A zero rate leaves the table untouched rather than renormalizing it.
    for (std::size_t r : report.lr > 0.0 ? rows : std::vector<std::size_t>{}) {
      auto f = model_.table.row(r);
      auto& g = grads[r];
      const double radial = dot(g, f);
      for (std::size_t d = 0; d < f.size(); ++d) f[d] -= report.lr * (g[d] - radial * f[d]);
      normalize(f);
    }

    for (std::size_t k = 0; k < b; ++k) {
      const LabeledInstance& a = part.labels[batch.anchors[k]];
      const std::size_t slot = by_cluster ? static_cast<std::size_t>(a.global_label - 1) : *a.proxy_index;
      bank.update(slot, forward.row(k));
    }
  }
  report.batches = iters;
  report.loss = iters > 0 ? loss_total / iters : 0.0;
  report.memory_degeneracies = bank.degeneracies();

  if (data_.has_ground_truth()) {
    const MemoryBank proxy_bank =
        by_cluster ? MemoryBank::from_partition(model_.table, proxy_groups, MemoryLevel::proxy, cfg_.mu) : bank;
    const auto assoc = collect_associations(model_, part.labels, part.retained, part.proxies, proxy_bank, cfg_.assoc);
    report.association = association_stats(assoc.anchors, assoc.offline, assoc.online, part.proxies, data_.true_ids);
  }
  if (observer_) observer_->on_epoch_end(ctx, model_, bank);
  if (evaluator_) report.retrieval = evaluator_(model_);
  ++epoch_;
  return report;
}

FitResult fit(const Dataset& data, const TrainConfig& cfg, TrainObserver* observer, Evaluator evaluator) {
  Trainer trainer(data, cfg);
  trainer.set_observer(observer);
  trainer.set_evaluator(std::move(evaluator));
  FitResult out;
  for (int e = 0; e < cfg.max_epochs; ++e) out.history.push_back(trainer.train_epoch());
  out.model = trainer.model();
  out.config = trainer.config();
  return out;
}

}  // namespace o2cap
