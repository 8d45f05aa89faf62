#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "o2cap/dataset.hpp"
#include "o2cap/matrix.hpp"

namespace o2cap {

/// Label of an instance DBSCAN discarded as noise. Never a valid cluster,
/// proxy label or memory index.
inline constexpr int kOutlier = -1;

struct DbscanParams {
  double eps = 0.5;
  int min_samples = 4;

  void validate() const;
};

/// Cluster labels 1..Y in order of each cluster's lowest-index core point,
/// or kOutlier.
struct ClusterAssignment {
  std::vector<int> labels;
  int num_clusters = 0;
};

/// Core point: at least min_samples points (itself included) at distance
/// <= eps. Clusters are the connected components of core points under
/// eps-reachability. A border point joins the cluster of its lowest-index
/// core neighbour. Everything else is kOutlier.
ClusterAssignment dbscan(const Matrix& distances, const DbscanParams& params);

/// The training view left after dropping DBSCAN noise.
struct RetainedSet {
  std::vector<std::size_t> indices;  // dataset indices, ascending
  std::vector<int> labels;           // compacted cluster labels 1..Y, parallel to indices
  int num_clusters = 0;

  std::size_t size() const { return indices.size(); }
};

/// Drops kOutlier entries and compacts labels to 1..Y preserving order.
/// Throws EmptyTrainingSetError when nothing survives.
RetainedSet discard_outliers(const ClusterAssignment& assignment);

/// Members of each cluster (slot y-1 holds label y), as dataset indices.
std::vector<std::vector<std::size_t>> cluster_members(const RetainedSet& retained);

/// One camera-specific slice of a cluster.
struct Proxy {
  int cluster = 0;           // global pseudo label
  int camera = 0;            // 1-based
  int label = 0;             // per-camera pseudo label, 1..Z_c
  std::size_t index = 0;     // global memory index
  std::vector<std::size_t> members;  // dataset indices, ascending
};

/// Camera-aware proxies. Global indices are grouped by camera in ascending
/// camera order, so the proxy of camera c with label z sits at offset(c) + z - 1.
class ProxyTable {
 public:
  ProxyTable() = default;
  ProxyTable(std::vector<Proxy> proxies, int num_cameras, int num_clusters, std::size_t num_instances);

  std::size_t size() const { return proxies_.size(); }
  int num_cameras() const { return static_cast<int>(per_camera_.size()); }
  int num_clusters() const { return static_cast<int>(cluster_proxies_.size()); }
  const Proxy& proxy(std::size_t j) const { return proxies_[j]; }
  const std::vector<Proxy>& proxies() const { return proxies_; }

  /// Z_c for camera c (1-based).
  std::size_t camera_count(int camera) const { return per_camera_[static_cast<std::size_t>(camera - 1)]; }
  /// A = sum of Z_c' for c' < c.
  std::size_t camera_offset(int camera) const { return offsets_[static_cast<std::size_t>(camera - 1)]; }
  /// Global indices of all proxies split from cluster `label` (ascending).
  const std::vector<std::size_t>& proxies_of_cluster(int label) const {
    return cluster_proxies_[static_cast<std::size_t>(label - 1)];
  }
  /// Proxy holding dataset instance i, or nullopt for outliers.
  std::optional<std::size_t> proxy_of(std::size_t instance) const;
  std::vector<std::vector<std::size_t>> members() const;

 private:
  std::vector<Proxy> proxies_;
  std::vector<std::size_t> per_camera_;
  std::vector<std::size_t> offsets_;
  std::vector<std::vector<std::size_t>> cluster_proxies_;
  std::vector<long> instance_proxy_;  // -1 for outliers
};

/// One proxy per non-empty (cluster, camera) pair. Within each camera the
/// proxies are numbered 1..Z_c by ascending cluster label. `cameras` is
/// indexed by dataset index; cameras outside [1, num_cameras] throw LabelError.
ProxyTable split_by_camera(const RetainedSet& retained, std::span<const int> cameras, int num_cameras,
                           std::size_t num_instances);

/// An instance annotated with its pseudo labels (an element of D'').
struct LabeledInstance {
  std::size_t index = 0;
  int camera = 0;
  int global_label = kOutlier;
  int proxy_label = kOutlier;
  std::optional<std::size_t> proxy_index;

  bool is_outlier() const { return global_label == kOutlier; }
};

/// D'' over the whole dataset; outliers keep kOutlier labels and no proxy index.
std::vector<LabeledInstance> label_instances(const Dataset& data, const RetainedSet& retained,
                                             const ProxyTable& table);

/// Debug dump: `instance,cluster,camera,proxy_label,proxy_index` (outliers get -1).
void write_assignment_csv(const std::filesystem::path& path, std::span<const LabeledInstance> labeled);

}  // namespace o2cap
