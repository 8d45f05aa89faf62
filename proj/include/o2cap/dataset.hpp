#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "o2cap/matrix.hpp"

namespace o2cap {

/// Ground-truth id value meaning "unknown" (stored as -1 in embedding files).
inline constexpr int kUnknownId = -1;

/// One sample: a unit embedding, its camera and an optional ground-truth id.
struct Instance {
  std::span<const double> embedding;
  int camera = 0;
  std::optional<int> true_id;
  std::size_t index = 0;
};

/// A set of instances stored column-wise. Embeddings are rows of `features`.
struct Dataset {
  Matrix features;
  std::vector<int> cameras;   // 1-based
  std::vector<int> true_ids;  // kUnknownId when absent

  std::size_t size() const { return cameras.size(); }
  std::size_t dim() const { return features.cols(); }
  /// Largest camera label present; C is inferred this way on load.
  int num_cameras() const;
  bool has_ground_truth() const;
  Instance instance(std::size_t i) const;
  /// Subset in the listed order.
  Dataset subset(std::span<const std::size_t> indices) const;
  /// Checks unit norms, camera range and shape consistency.
  void validate(double norm_tolerance = 1e-6) const;
};

struct SynthesisConfig {
  int num_ids = 40;
  int num_cameras = 6;
  int dim = 32;
  int cameras_per_id = 4;
  int images_per_id = 20;
  double camera_shift_scale = 1.0;
  double noise_scale = 0.7;
  std::uint64_t rng_seed = 7;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
};

/// Generates a labelled multi-camera dataset. Each instance is
/// normalize(prototype[id] + bias[camera] + noise). Prototypes are random unit
/// vectors, each camera bias is a random direction scaled to camera_shift_scale,
/// and noise is isotropic gaussian with expected norm noise_scale.
/// Instances are ordered by id, then camera. Pure function of `cfg`.
Dataset synthesize(const SynthesisConfig& cfg);

/// Fresh-noise draw over the same ids, cameras and per-id camera subsets as
/// synthesize(cfg). `stream` selects an independent noise stream (stream 0
/// reproduces synthesize(cfg) when images_per_id matches).
Dataset synthesize_split(const SynthesisConfig& cfg, std::uint64_t stream, int images_per_id);

struct QueryGallery {
  Dataset query;
  Dataset gallery;
};

/// Held-out query/gallery split for the ids of `cfg`: per id, `query_per_camera`
/// and `gallery_per_camera` images in each of its cameras, drawn from noise
/// streams that never coincide with the training stream.
QueryGallery synthesize_holdout(const SynthesisConfig& cfg, int query_per_camera = 1,
                                int gallery_per_camera = 2);

enum class EmbeddingEncoding { csv, binary };

/// Writes the embedding file. CSV: header `dim=<d>,n=<N>` then
/// `camera,true_id_or_-1,v1,...,vd` per row. Binary: magic `O2EB`, u32 N,
/// u32 d, then N records of (u32 camera, i32 true_id, d x f32), little endian.
void save_embeddings(const std::filesystem::path& path, const Dataset& data,
                     EmbeddingEncoding encoding);

/// Reads either encoding (detected by the magic bytes) and re-normalizes
/// every embedding. Throws IoError if the file cannot be opened and
/// ParseError naming the byte or line offset of malformed content.
Dataset load_embeddings(const std::filesystem::path& path);

}  // namespace o2cap
