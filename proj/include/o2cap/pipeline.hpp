#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>

#include <json.hpp>

#include "o2cap/config.hpp"
#include "o2cap/eval.hpp"
#include "o2cap/trainer.hpp"

namespace o2cap {

/// Training inputs plus the held-out split, when one is available.
struct RunData {
  Dataset train;
  std::optional<QueryGallery> holdout;
};

/// Synthesizes or loads the training set; the holdout comes from
/// eval.query/eval.gallery files, or from the synthetic generator when the
/// training set is synthetic. Checks k2 against the loaded camera count.
RunData load_run_data(const RunConfig& cfg);

/// mAP / CMC of `model` on the holdout, embedding unseen inputs through
/// EmbeddingModel::extend.
RetrievalMetrics evaluate_model(const EmbeddingModel& model, const Dataset& train, const QueryGallery& holdout,
                                int neighbors);

/// Clustering and association diagnostics of a trained table.
struct Analysis {
  std::optional<RetrievalMetrics> retrieval;
  std::optional<ClusteringQuality> clustering;
  std::optional<AssociationStats> association;
  int clusters = 0;
  std::size_t proxies = 0;
  std::size_t outliers = 0;
};

/// Clusters the table as training would, builds a proxy memory from it and
/// measures association quality (ground truth permitting) and retrieval.
Analysis analyze(const EmbeddingModel& model, const Dataset& train, const TrainConfig& cfg,
                 const QueryGallery* holdout);

/// One row per epoch: epoch,loss,map,r1,iou,prec_off,prec_on,prec_union,
/// rec_off,rec_on,rec_union,lr,clusters,proxies,outliers,ari. Missing values
/// are empty fields.
std::string history_csv(std::span<const EpochReport> history);
void write_history_csv(const std::filesystem::path& path, std::span<const EpochReport> history);

/// {map, cmc: {r1, r5, r10}, ari, purity, assoc: {...}}; absent parts are null.
nlohmann::json metrics_json(const Analysis& analysis);
nlohmann::json history_json(std::span<const EpochReport> history);

/// Checkpoint: the table as a binary embedding file (cameras and ids of the
/// training set), plus a JSON sidecar with the same stem holding the resolved
/// config and the history.
void write_checkpoint(const std::filesystem::path& embeddings, const EmbeddingModel& model, const Dataset& train,
                      const RunConfig& cfg, std::span<const EpochReport> history);

struct Checkpoint {
  Dataset table;  // trained rows with training cameras / ids
  RunConfig config;
};

/// Throws IoError when either file is missing and ParseError / ConfigError
/// when they are malformed.
Checkpoint load_checkpoint(const std::filesystem::path& embeddings);

/// CSV observer: `epoch,batch,anchor,mode,positives,negatives` per anchor and
/// association, the sets joined by spaces.
class AssociationDump : public TrainObserver {
 public:
  explicit AssociationDump(const std::filesystem::path& path);
  void on_batch(const BatchTrace& trace) override;

 private:
  std::ofstream stream_;
};

}  // namespace o2cap
