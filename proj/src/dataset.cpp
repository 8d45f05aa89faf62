#include "o2cap/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

namespace o2cap {

int Dataset::num_cameras() const {
  return cameras.empty() ? 0 : *std::max_element(cameras.begin(), cameras.end());
}

bool Dataset::has_ground_truth() const {
  return !true_ids.empty() &&
         std::none_of(true_ids.begin(), true_ids.end(), [](int id) { return id == kUnknownId; });
}

Instance Dataset::instance(std::size_t i) const {
  Instance inst;
  inst.embedding = features.row(i);
  inst.camera = cameras[i];
  if (true_ids[i] != kUnknownId) inst.true_id = true_ids[i];
  inst.index = i;
  return inst;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.features = features.gather(indices);
  out.cameras.reserve(indices.size());
  out.true_ids.reserve(indices.size());
  for (std::size_t i : indices) {
    out.cameras.push_back(cameras[i]);
    out.true_ids.push_back(true_ids[i]);
  }
  return out;
}

void Dataset::validate(double norm_tolerance) const {
  if (features.rows() != cameras.size() || cameras.size() != true_ids.size())
    throw ShapeError("dataset: features, cameras and ids disagree in length");
  for (std::size_t i = 0; i < size(); ++i) {
    if (cameras[i] < 1) throw LabelError("dataset: camera label < 1 at instance " + std::to_string(i));
    if (std::abs(norm(features.row(i)) - 1.0) > norm_tolerance)
      throw ShapeError("dataset: embedding " + std::to_string(i) + " is not unit norm");
  }
}

void SynthesisConfig::validate() const {
  if (num_ids < 1) throw ConfigError("synth: num_ids must be >= 1");
  if (num_cameras < 1) throw ConfigError("synth: num_cameras must be >= 1");
  if (dim < 1) throw ConfigError("synth: dim must be >= 1");
  if (cameras_per_id < 1 || cameras_per_id > num_cameras)
    throw ConfigError("synth: cameras_per_id must lie in [1, num_cameras]");
  if (images_per_id < cameras_per_id)
    throw ConfigError("synth: images_per_id must be >= cameras_per_id");
  if (!std::isfinite(camera_shift_scale) || camera_shift_scale < 0.0)
    throw ConfigError("synth: camera_shift_scale must be finite and >= 0");
  if (!std::isfinite(noise_scale) || noise_scale < 0.0)
    throw ConfigError("synth: noise_scale must be finite and >= 0");
}

namespace {

constexpr std::uint64_t kStructureStream = 0x5eedc0de;
constexpr std::uint64_t kNoiseStream = 0x0ddba11;

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t purpose, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

std::vector<double> gaussian_unit(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(dim));
  do {
    for (double& x : v) x = normal(rng);
  } while (norm(v) < 1e-12);
  normalize(v);
  return v;
}

struct Structure {
  std::vector<std::vector<double>> prototypes;
  std::vector<std::vector<double>> camera_bias;  // indexed by camera - 1
  std::vector<std::vector<int>> id_cameras;      // ascending camera labels
};

Structure make_structure(const SynthesisConfig& cfg) {
  auto rng = make_engine(cfg.rng_seed, kStructureStream, 0);
  Structure s;
  for (int id = 0; id < cfg.num_ids; ++id) s.prototypes.push_back(gaussian_unit(rng, cfg.dim));
  for (int c = 0; c < cfg.num_cameras; ++c) {
    auto b = gaussian_unit(rng, cfg.dim);
    for (double& x : b) x *= cfg.camera_shift_scale;
    s.camera_bias.push_back(std::move(b));
  }
  std::vector<int> all(static_cast<std::size_t>(cfg.num_cameras));
  std::iota(all.begin(), all.end(), 1);
  for (int id = 0; id < cfg.num_ids; ++id) {
    // partial Fisher-Yates: the first cameras_per_id slots are a uniform draw
    for (int k = 0; k < cfg.cameras_per_id; ++k) {
      std::uniform_int_distribution<int> pick(k, cfg.num_cameras - 1);
      std::swap(all[static_cast<std::size_t>(k)], all[static_cast<std::size_t>(pick(rng))]);
    }
    std::vector<int> cams(all.begin(), all.begin() + cfg.cameras_per_id);
    std::sort(cams.begin(), cams.end());
    s.id_cameras.push_back(std::move(cams));
  }
  return s;
}

}  // namespace

Dataset synthesize_split(const SynthesisConfig& cfg, std::uint64_t stream, int images_per_id) {
  cfg.validate();
  if (images_per_id < cfg.cameras_per_id)
    throw ConfigError("synth: images_per_id must be >= cameras_per_id");
  const Structure s = make_structure(cfg);
  auto rng = make_engine(cfg.rng_seed, kNoiseStream, stream);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double noise_sd = cfg.noise_scale / std::sqrt(static_cast<double>(cfg.dim));

  Dataset out;
  std::vector<double> x(static_cast<std::size_t>(cfg.dim));
  for (int id = 0; id < cfg.num_ids; ++id) {
    const auto& cams = s.id_cameras[static_cast<std::size_t>(id)];
    const int base = images_per_id / cfg.cameras_per_id;
    const int extra = images_per_id % cfg.cameras_per_id;
    for (int k = 0; k < cfg.cameras_per_id; ++k) {
      const int cam = cams[static_cast<std::size_t>(k)];
      const int count = base + (k < extra ? 1 : 0);
      for (int n = 0; n < count; ++n) {
        const auto& proto = s.prototypes[static_cast<std::size_t>(id)];
        const auto& bias = s.camera_bias[static_cast<std::size_t>(cam - 1)];
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = proto[j] + bias[j] + noise_sd * normal(rng);
        if (normalize(x) < 1e-12) {
          // prototype and bias cancelled exactly; fall back to the prototype direction
          std::copy(proto.begin(), proto.end(), x.begin());
        }
        out.features.push_row(x);
        out.cameras.push_back(cam);
        out.true_ids.push_back(id);
      }
    }
  }
  return out;
}

Dataset synthesize(const SynthesisConfig& cfg) { return synthesize_split(cfg, 0, cfg.images_per_id); }

QueryGallery synthesize_holdout(const SynthesisConfig& cfg, int query_per_camera, int gallery_per_camera) {
  if (query_per_camera < 1 || gallery_per_camera < 1)
    throw ConfigError("holdout: per-camera counts must be >= 1");
  QueryGallery qg;
  qg.query = synthesize_split(cfg, 1, query_per_camera * cfg.cameras_per_id);
  qg.gallery = synthesize_split(cfg, 2, gallery_per_camera * cfg.cameras_per_id);
  return qg;
}

// ---------------------------------------------------------------------------
// file formats

namespace {

constexpr char kMagic[4] = {'O', '2', 'E', 'B'};

void put_u32(std::ostream& os, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(bytes, 4);
}

std::uint32_t get_u32(const std::string& buf, std::size_t offset) {
  std::uint32_t v = 0;
  for (int b = 3; b >= 0; --b)
    v = (v << 8) | static_cast<unsigned char>(buf[offset + static_cast<std::size_t>(b)]);
  return v;
}

Dataset parse_binary(const std::string& buf) {
  auto fail = [](std::size_t offset, const std::string& what) {
    throw ParseError("embedding file: " + what + " at byte " + std::to_string(offset));
  };
  if (buf.size() < 12) fail(buf.size(), "truncated header");
  const std::uint32_t n = get_u32(buf, 4);
  const std::uint32_t d = get_u32(buf, 8);
  if (d == 0) fail(8, "zero dimension");
  const std::size_t record = 8 + 4 * static_cast<std::size_t>(d);
  const std::size_t expected = 12 + record * n;
  if (buf.size() != expected)
    fail(std::min(buf.size(), expected), "size mismatch (expected " + std::to_string(expected) +
                                             " bytes, found " + std::to_string(buf.size()) + ")");
  Dataset out;
  std::vector<double> v(d);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t at = 12 + i * record;
    const std::uint32_t cam = get_u32(buf, at);
    const auto id = static_cast<std::int32_t>(get_u32(buf, at + 4));
    if (cam < 1) fail(at, "camera label < 1");
    if (id < kUnknownId) fail(at + 4, "negative true id other than -1");
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t off = at + 8 + 4 * j;
      const float f = std::bit_cast<float>(get_u32(buf, off));
      if (!std::isfinite(f)) fail(off, "non-finite value");
      v[j] = static_cast<double>(f);
    }
    if (normalize(v) < 1e-12) fail(at + 8, "zero-norm embedding");
    out.features.push_row(v);
    out.cameras.push_back(static_cast<int>(cam));
    out.true_ids.push_back(id);
  }
  if (n == 0) out.features = Matrix(0, d);
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                         : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

Dataset parse_csv(const std::string& buf) {
  auto fail = [](std::size_t line, const std::string& what) {
    throw ParseError("embedding file: " + what + " at line " + std::to_string(line));
  };
  std::istringstream in(buf);
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) fail(1, "missing header");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::size_t d = 0, n = 0;
  {
    const auto fields = split_commas(line);
    if (fields.size() != 2 || !fields[0].starts_with("dim=") || !fields[1].starts_with("n=") ||
        !parse_number(fields[0].substr(4), d) || !parse_number(fields[1].substr(2), n) || d == 0)
      fail(lineno, "malformed header (expected dim=<d>,n=<N>)");
  }
  Dataset out;
  std::vector<double> v(d);
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != d + 2)
      fail(lineno, "expected " + std::to_string(d + 2) + " fields, found " + std::to_string(fields.size()));
    int cam = 0, id = 0;
    if (!parse_number(fields[0], cam) || cam < 1) fail(lineno, "bad camera label");
    if (!parse_number(fields[1], id) || id < kUnknownId) fail(lineno, "bad true id");
    for (std::size_t j = 0; j < d; ++j) {
      if (!parse_number(fields[j + 2], v[j]) || !std::isfinite(v[j]))
        fail(lineno, "non-finite or unparsable value in column " + std::to_string(j + 3));
    }
    if (normalize(v) < 1e-12) fail(lineno, "zero-norm embedding");
    out.features.push_row(v);
    out.cameras.push_back(cam);
    out.true_ids.push_back(id);
  }
  if (out.size() != n)
    fail(lineno, "header declares " + std::to_string(n) + " rows, found " + std::to_string(out.size()));
  if (n == 0) out.features = Matrix(0, d);
  return out;
}

}  // namespace

void save_embeddings(const std::filesystem::path& path, const Dataset& data, EmbeddingEncoding encoding) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  const std::size_t d = data.dim();
  if (encoding == EmbeddingEncoding::binary) {
    os.write(kMagic, 4);
    put_u32(os, static_cast<std::uint32_t>(data.size()));
    put_u32(os, static_cast<std::uint32_t>(d));
    for (std::size_t i = 0; i < data.size(); ++i) {
      put_u32(os, static_cast<std::uint32_t>(data.cameras[i]));
      put_u32(os, static_cast<std::uint32_t>(static_cast<std::int32_t>(data.true_ids[i])));
      for (double x : data.features.row(i)) put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
    }
  } else {
    os << "dim=" << d << ",n=" << data.size() << '\n';
    os << std::setprecision(17);
    for (std::size_t i = 0; i < data.size(); ++i) {
      os << data.cameras[i] << ',' << data.true_ids[i];
      for (double x : data.features.row(i)) os << ',' << x;
      os << '\n';
    }
  }
  if (!os) throw IoError("write failed for " + path.string());
}

Dataset load_embeddings(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (buf.size() >= 4 && std::equal(kMagic, kMagic + 4, buf.begin())) return parse_binary(buf);
  return parse_csv(buf);
}

}  // namespace o2cap
