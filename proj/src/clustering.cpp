#include "o2cap/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>

#include "o2cap/error.hpp"

namespace o2cap {

void DbscanParams::validate() const {
  if (!std::isfinite(eps) || eps <= 0.0) throw ParameterError("dbscan: eps must be finite and > 0");
  if (min_samples < 1) throw ParameterError("dbscan: min_samples must be >= 1");
}

ClusterAssignment dbscan(const Matrix& distances, const DbscanParams& params) {
  params.validate();
  const std::size_t n = distances.rows();
  if (distances.cols() != n) throw ShapeError("dbscan: distance matrix must be square");

  std::vector<std::vector<std::size_t>> neighbours(n);
  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t si = 0; si < sn; ++si) {
    const auto i = static_cast<std::size_t>(si);
    for (std::size_t j = 0; j < n; ++j)
      if (distances(i, j) <= params.eps) neighbours[i].push_back(j);
  }
  std::vector<char> core(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    core[i] = neighbours[i].size() >= static_cast<std::size_t>(params.min_samples);

  ClusterAssignment out;
  out.labels.assign(n, kOutlier);
  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (!core[seed] || out.labels[seed] != kOutlier) continue;
    const int label = ++out.num_clusters;
    out.labels[seed] = label;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      for (std::size_t q : neighbours[p]) {
        if (core[q] && out.labels[q] == kOutlier) {
          out.labels[q] = label;
          stack.push_back(q);
        }
      }
    }
  }
  // neighbour lists are ascending, so the first core neighbour is the lowest-index one
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    for (std::size_t q : neighbours[i]) {
      if (core[q]) {
        out.labels[i] = out.labels[q];
        break;
      }
    }
  }
  return out;
}

RetainedSet discard_outliers(const ClusterAssignment& assignment) {
  RetainedSet out;
  std::map<int, int> remap;
  for (std::size_t i = 0; i < assignment.labels.size(); ++i) {
    const int label = assignment.labels[i];
    if (label == kOutlier) continue;
    remap.try_emplace(label, 0);
    out.indices.push_back(i);
    out.labels.push_back(label);
  }
  if (out.indices.empty()) throw EmptyTrainingSetError("all instances were discarded as outliers");
  // compact by ascending original label so an already-compact labelling is unchanged
  int next = 0;
  for (auto& [label, compact] : remap) compact = ++next;
  for (int& label : out.labels) label = remap[label];
  out.num_clusters = next;
  return out;
}

std::vector<std::vector<std::size_t>> cluster_members(const RetainedSet& retained) {
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(retained.num_clusters));
  for (std::size_t k = 0; k < retained.size(); ++k)
    members[static_cast<std::size_t>(retained.labels[k] - 1)].push_back(retained.indices[k]);
  return members;
}

ProxyTable::ProxyTable(std::vector<Proxy> proxies, int num_cameras, int num_clusters,
                       std::size_t num_instances)
    : proxies_(std::move(proxies)),
      per_camera_(static_cast<std::size_t>(num_cameras), 0),
      offsets_(static_cast<std::size_t>(num_cameras), 0),
      cluster_proxies_(static_cast<std::size_t>(num_clusters)),
      instance_proxy_(num_instances, -1) {
  for (const Proxy& p : proxies_) {
    ++per_camera_[static_cast<std::size_t>(p.camera - 1)];
    cluster_proxies_[static_cast<std::size_t>(p.cluster - 1)].push_back(p.index);
    for (std::size_t m : p.members) instance_proxy_[m] = static_cast<long>(p.index);
  }
  for (std::size_t c = 1; c < offsets_.size(); ++c) offsets_[c] = offsets_[c - 1] + per_camera_[c - 1];
}

std::optional<std::size_t> ProxyTable::proxy_of(std::size_t instance) const {
  if (instance >= instance_proxy_.size() || instance_proxy_[instance] < 0) return std::nullopt;
  return static_cast<std::size_t>(instance_proxy_[instance]);
}

std::vector<std::vector<std::size_t>> ProxyTable::members() const {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(proxies_.size());
  for (const Proxy& p : proxies_) out.push_back(p.members);
  return out;
}

ProxyTable split_by_camera(const RetainedSet& retained, std::span<const int> cameras, int num_cameras,
                           std::size_t num_instances) {
  if (num_cameras < 1) throw LabelError("split_by_camera: need at least one camera");
  // (camera, cluster) -> members; std::map iteration gives camera-major, cluster-minor order
  std::map<std::pair<int, int>, std::vector<std::size_t>> groups;
  for (std::size_t k = 0; k < retained.size(); ++k) {
    const std::size_t i = retained.indices[k];
    if (retained.labels[k] == kOutlier)
      throw LabelError("split_by_camera: outlier present; call discard_outliers first");
    const int cam = cameras[i];
    if (cam < 1 || cam > num_cameras)
      throw LabelError("split_by_camera: camera " + std::to_string(cam) + " of instance " +
                       std::to_string(i) + " outside [1, " + std::to_string(num_cameras) + "]");
    groups[{cam, retained.labels[k]}].push_back(i);
  }
  std::vector<Proxy> proxies;
  proxies.reserve(groups.size());
  int current_camera = 0;
  int label = 0;
  for (auto& [key, members] : groups) {
    if (key.first != current_camera) {
      current_camera = key.first;
      label = 0;
    }
    Proxy p;
    p.camera = key.first;
    p.cluster = key.second;
    p.label = ++label;
    p.index = proxies.size();
    std::sort(members.begin(), members.end());
    p.members = std::move(members);
    proxies.push_back(std::move(p));
  }
  return ProxyTable(std::move(proxies), num_cameras, retained.num_clusters, num_instances);
}

std::vector<LabeledInstance> label_instances(const Dataset& data, const RetainedSet& retained,
                                             const ProxyTable& table) {
  std::vector<LabeledInstance> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out[i].index = i;
    out[i].camera = data.cameras[i];
  }
  for (std::size_t k = 0; k < retained.size(); ++k) {
    LabeledInstance& li = out[retained.indices[k]];
    li.global_label = retained.labels[k];
    li.proxy_index = table.proxy_of(li.index);
    if (li.proxy_index) li.proxy_label = table.proxy(*li.proxy_index).label;
  }
  return out;
}

void write_assignment_csv(const std::filesystem::path& path, std::span<const LabeledInstance> labeled) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "instance,cluster,camera,proxy_label,proxy_index\n";
  for (const auto& li : labeled) {
    os << li.index << ',' << li.global_label << ',' << li.camera << ',' << li.proxy_label << ','
       << (li.proxy_index ? static_cast<long>(*li.proxy_index) : -1L) << '\n';
  }
}

}  // namespace o2cap
