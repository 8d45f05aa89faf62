#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "o2cap/association.hpp"
#include "o2cap/clustering.hpp"
#include "o2cap/dataset.hpp"
#include "o2cap/eval.hpp"
#include "o2cap/losses.hpp"
#include "o2cap/memory.hpp"
#include "o2cap/metricspace.hpp"

namespace o2cap {

/// Training objective. The names follow the ablation ladder:
/// base = cluster-level InfoNCE over all clusters, base2 = with hard negative
/// clusters, off / on = proxy contrast on offline / online associations,
/// o2cap = off + on, merge = single contrast over the merged association,
/// cap = intra-camera + off.
enum class LossMode { base, base2, off, on, o2cap, merge, cap };

std::string_view to_string(LossMode mode);
/// Throws ConfigError for unknown names.
LossMode parse_loss_mode(std::string_view name);

/// Batch composition: `automatic` picks cluster-balanced sampling for the
/// cluster-level baselines and proxy-balanced sampling otherwise.
enum class Sampling { automatic, proxy, cluster };

std::string_view to_string(Sampling s);
Sampling parse_sampling(std::string_view name);

struct TrainConfig {
  int max_epochs = 25;
  int iters_per_epoch = 0;     // 0: ceil(N' / batch size)
  int batch_proxies = 8;       // P
  int batch_instances = 4;     // K
  double lr = 2.0;
  int warmup_epochs = -1;      // -1: max_epochs / 5
  int decay_every = -1;        // -1: 2 * max_epochs / 5
  double decay_factor = 0.1;
  double mu = 0.2;
  bool renormalize_memory = true;
  bool online_epoch_snapshot = false;  // online association against the epoch-start bank instead of batch start
  LossParams loss;
  AssociationParams assoc{50, 0, 0.15};  // k2 = 0: one less than the dataset's cameras per id
  LossMode loss_mode = LossMode::o2cap;
  Sampling sampling = Sampling::automatic;
  bool use_jaccard = true;
  JaccardParams jaccard;
  DbscanParams dbscan;
  std::uint64_t rng_seed = 1;
  int eval_neighbors = 3;

  int batch_size() const { return batch_proxies * batch_instances; }
  /// Throws ConfigError on invalid values; num_cameras enables the k2 <= C check.
  void validate(int num_cameras) const;
};

/// max(1, round(mean cameras per id) - 1), using ground truth when present;
/// otherwise 1.
int default_k2(const Dataset& data);

/// Learning rate for a 0-based epoch: linear warmup, then step decay.
double learning_rate(const TrainConfig& cfg, int epoch);

/// The learnable stand-in for the feature extractor: one unit vector per
/// training instance.
struct EmbeddingModel {
  Matrix table;

  static EmbeddingModel from_inputs(const Dataset& data);

  /// Embeds unseen inputs as the normalized mean of the trained rows of their
  /// `neighbors` nearest training inputs (cosine, ties by index).
  Matrix extend(const Matrix& train_inputs, const Matrix& unseen, int neighbors) const;
};

/// Proxy-balanced (or cluster-balanced) batch: `groups` distinct groups drawn
/// uniformly, K members each, with replacement only when a group has fewer
/// than K members. Fewer groups than P shrink the batch.
struct Batch {
  std::vector<std::size_t> anchors;  // dataset indices, grouped
  std::vector<std::size_t> groups;   // proxy or cluster slots
  bool shrunk = false;
};

Batch sample_batch(std::span<const std::vector<std::size_t>> groups, int group_count, int per_group,
                   std::mt19937_64& rng);

/// What an observer sees after each batch, before the parameter step.
struct BatchTrace {
  int epoch = 0;
  int batch = 0;
  const Batch* batch_data = nullptr;
  const ProxyTable* proxies = nullptr;
  const std::vector<LabeledInstance>* labels = nullptr;
  const MemoryBank* bank = nullptr;   // state used by this batch's losses
  std::span<const AssociationResult> offline;  // per anchor, empty if unused
  std::span<const AssociationResult> online;
  std::span<const AssociationResult> merged;
};

struct EpochContext {
  int epoch = 0;
  const RetainedSet* retained = nullptr;
  const ProxyTable* proxies = nullptr;
  const std::vector<LabeledInstance>* labels = nullptr;
};

class TrainObserver {
 public:
  virtual ~TrainObserver() = default;
  virtual void on_epoch_begin(const EpochContext&) {}
  virtual void on_batch(const BatchTrace&) {}
  /// Called after the epoch's last memory update.
  virtual void on_epoch_end(const EpochContext&, const EmbeddingModel&, const MemoryBank&) {}
};

struct EpochReport {
  int epoch = 0;  // 1-based
  double lr = 0.0;
  double loss = 0.0;  // mean over batches of the batch-mean loss
  int batches = 0;
  bool batch_shrunk = false;
  std::size_t retained = 0;
  std::size_t outliers = 0;
  int clusters = 0;
  std::size_t proxies = 0;
  std::size_t memory_degeneracies = 0;
  std::optional<ClusteringQuality> clustering;
  std::optional<AssociationStats> association;
  std::optional<RetrievalMetrics> retrieval;
};

using Evaluator = std::function<RetrievalMetrics(const EmbeddingModel&)>;

/// Offline and online positives of every retained instance under `model`,
/// against `bank` (proxy level), as used for the association statistics.
struct EpochAssociations {
  std::vector<std::size_t> anchors;
  std::vector<std::vector<std::size_t>> offline;
  std::vector<std::vector<std::size_t>> online;
};

EpochAssociations collect_associations(const EmbeddingModel& model, const std::vector<LabeledInstance>& labels,
                                       const RetainedSet& retained, const ProxyTable& proxies,
                                       const MemoryBank& bank, const AssociationParams& params);

/// Result of clustering the current features: the pseudo-labelled training view.
struct Partition {
  ClusterAssignment assignment;
  RetainedSet retained;
  ProxyTable proxies;
  std::vector<LabeledInstance> labels;
};

/// Distances (Jaccard or plain), DBSCAN, outlier removal and camera split.
Partition build_partition(const Matrix& features, const Dataset& data, const TrainConfig& cfg);

/// Runs the per-epoch clustering and the batch loop over an embedding table.
class Trainer {
 public:
  /// `cfg.assoc.k2 == 0` is resolved with default_k2(data). Validates cfg.
  Trainer(const Dataset& data, TrainConfig cfg);

  /// Clusters, splits, builds memory, then runs the epoch's batches.
  /// Throws EmptyTrainingSetError if every instance is an outlier.
  EpochReport train_epoch();

  const EmbeddingModel& model() const { return model_; }
  EmbeddingModel& model() { return model_; }
  const TrainConfig& config() const { return cfg_; }
  int epochs_done() const { return epoch_; }

  void set_observer(TrainObserver* observer) { observer_ = observer; }
  void set_evaluator(Evaluator evaluator) { evaluator_ = std::move(evaluator); }

 private:
  bool uses_cluster_bank() const;
  Sampling effective_sampling() const;

  const Dataset& data_;
  TrainConfig cfg_;
  EmbeddingModel model_;
  std::mt19937_64 rng_;
  int epoch_ = 0;
  TrainObserver* observer_ = nullptr;
  Evaluator evaluator_;
};

struct FitResult {
  EmbeddingModel model;
  std::vector<EpochReport> history;
  TrainConfig config;  // with k2 resolved
};

/// Runs cfg.max_epochs epochs from the input embeddings.
FitResult fit(const Dataset& data, const TrainConfig& cfg, TrainObserver* observer = nullptr,
              Evaluator evaluator = {});

}  // namespace o2cap
