#include "o2cap/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <vector>

#include "o2cap/error.hpp"

namespace o2cap {

using nlohmann::json;

namespace {

struct Field {
  std::string key;
  std::function<json(RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

[[noreturn]] void bad_type(const std::string& key, const char* want) {
  throw ConfigError("config: '" + key + "' must be " + want);
}

template <class T, class Access>
Field number(std::string key, Access access) {
  Field f;
  f.key = key;
  f.get = [access](RunConfig& c) { return json(access(c)); };
  f.set = [access, key](RunConfig& c, const json& v) {
    if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) bad_type(key, "a number");
      access(c) = v.get<T>();
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) bad_type(key, "a non-negative integer");
      access(c) = v.get<T>();
    } else {
      if (!v.is_number_integer()) bad_type(key, "an integer");
      access(c) = v.get<T>();
    }
  };
  return f;
}

template <class Access>
Field boolean(std::string key, Access access) {
  Field f;
  f.key = key;
  f.get = [access](RunConfig& c) { return json(access(c)); };
  f.set = [access, key](RunConfig& c, const json& v) {
    if (!v.is_boolean()) bad_type(key, "true or false");
    access(c) = v.get<bool>();
  };
  return f;
}

template <class Access>
Field text(std::string key, Access access) {
  Field f;
  f.key = key;
  f.get = [access](RunConfig& c) { return json(access(c)); };
  f.set = [access, key](RunConfig& c, const json& v) {
    if (!v.is_string()) bad_type(key, "a string");
    access(c) = v.get<std::string>();
  };
  return f;
}

template <class Access, class ToString, class Parse>
Field choice(std::string key, Access access, ToString to_str, Parse parse) {
  Field f;
  f.key = key;
  f.get = [access, to_str](RunConfig& c) { return json(std::string(to_str(access(c)))); };
  f.set = [access, parse, key](RunConfig& c, const json& v) {
    if (!v.is_string()) bad_type(key, "a string");
    access(c) = parse(v.get<std::string>());
  };
  return f;
}

std::string_view encoding_name(EmbeddingEncoding e) { return e == EmbeddingEncoding::csv ? "csv" : "binary"; }

EmbeddingEncoding parse_encoding(const std::string& s) {
  if (s == "csv") return EmbeddingEncoding::csv;
  if (s == "binary") return EmbeddingEncoding::binary;
  throw ConfigError("config: output.encoding must be csv or binary");
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(number<int>("synth.num_ids", [](RunConfig& c) -> int& { return c.synth.num_ids; }));
    f.push_back(number<int>("synth.num_cameras", [](RunConfig& c) -> int& { return c.synth.num_cameras; }));
    f.push_back(number<int>("synth.dim", [](RunConfig& c) -> int& { return c.synth.dim; }));
    f.push_back(number<int>("synth.cameras_per_id", [](RunConfig& c) -> int& { return c.synth.cameras_per_id; }));
    f.push_back(number<int>("synth.images_per_id", [](RunConfig& c) -> int& { return c.synth.images_per_id; }));
    f.push_back(number<double>("synth.camera_shift", [](RunConfig& c) -> double& { return c.synth.camera_shift_scale; }));
    f.push_back(number<double>("synth.noise", [](RunConfig& c) -> double& { return c.synth.noise_scale; }));
    f.push_back(number<std::uint64_t>("synth.seed", [](RunConfig& c) -> std::uint64_t& { return c.synth.rng_seed; }));
    f.push_back(text("data.path", [](RunConfig& c) -> std::string& { return c.data_path; }));

    f.push_back(number<int>("train.epochs", [](RunConfig& c) -> int& { return c.train.max_epochs; }));
    f.push_back(number<int>("train.iters_per_epoch", [](RunConfig& c) -> int& { return c.train.iters_per_epoch; }));
    f.push_back(number<int>("train.batch_p", [](RunConfig& c) -> int& { return c.train.batch_proxies; }));
    f.push_back(number<int>("train.batch_k", [](RunConfig& c) -> int& { return c.train.batch_instances; }));
    f.push_back(number<int>("train.batch_size", [](RunConfig& c) -> int& { return c.batch_size; }));
    f.push_back(number<double>("train.lr", [](RunConfig& c) -> double& { return c.train.lr; }));
    f.push_back(number<int>("train.warmup_epochs", [](RunConfig& c) -> int& { return c.train.warmup_epochs; }));
    f.push_back(number<int>("train.decay_every", [](RunConfig& c) -> int& { return c.train.decay_every; }));
    f.push_back(number<double>("train.decay_factor", [](RunConfig& c) -> double& { return c.train.decay_factor; }));
    f.push_back(choice("train.loss_mode", [](RunConfig& c) -> LossMode& { return c.train.loss_mode; },
                       [](LossMode m) { return to_string(m); }, [](const std::string& s) { return parse_loss_mode(s); }));
    f.push_back(choice("train.sampling", [](RunConfig& c) -> Sampling& { return c.train.sampling; },
                       [](Sampling s) { return to_string(s); }, [](const std::string& s) { return parse_sampling(s); }));
    f.push_back(number<std::uint64_t>("train.seed", [](RunConfig& c) -> std::uint64_t& { return c.train.rng_seed; }));

    f.push_back(number<double>("memory.mu", [](RunConfig& c) -> double& { return c.train.mu; }));
    f.push_back(boolean("memory.renormalize", [](RunConfig& c) -> bool& { return c.train.renormalize_memory; }));
    f.push_back(number<double>("loss.tau", [](RunConfig& c) -> double& { return c.train.loss.tau; }));
    f.push_back(number<int>("assoc.k1", [](RunConfig& c) -> int& { return c.train.assoc.k1; }));
    f.push_back(number<int>("assoc.k2", [](RunConfig& c) -> int& { return c.train.assoc.k2; }));
    f.push_back(boolean("assoc.epoch_snapshot", [](RunConfig& c) -> bool& { return c.train.online_epoch_snapshot; }));
    f.push_back(number<double>("assoc.w", [](RunConfig& c) -> double& { return c.train.assoc.w; }));
    f.push_back(number<double>("dbscan.eps", [](RunConfig& c) -> double& { return c.train.dbscan.eps; }));
    f.push_back(number<int>("dbscan.min_samples", [](RunConfig& c) -> int& { return c.train.dbscan.min_samples; }));
    f.push_back(boolean("jaccard.enabled", [](RunConfig& c) -> bool& { return c.train.use_jaccard; }));
    f.push_back(number<int>("jaccard.k1", [](RunConfig& c) -> int& { return c.train.jaccard.k1; }));
    f.push_back(number<int>("jaccard.k2", [](RunConfig& c) -> int& { return c.train.jaccard.k2; }));
    f.push_back(number<double>("jaccard.lambda", [](RunConfig& c) -> double& { return c.train.jaccard.lambda; }));

    f.push_back(number<int>("eval.query_per_camera", [](RunConfig& c) -> int& { return c.eval.query_per_camera; }));
    f.push_back(number<int>("eval.gallery_per_camera", [](RunConfig& c) -> int& { return c.eval.gallery_per_camera; }));
    f.push_back(text("eval.query", [](RunConfig& c) -> std::string& { return c.eval.query; }));
    f.push_back(text("eval.gallery", [](RunConfig& c) -> std::string& { return c.eval.gallery; }));
    f.push_back(number<int>("eval.neighbors", [](RunConfig& c) -> int& { return c.train.eval_neighbors; }));

    f.push_back(text("output.dir", [](RunConfig& c) -> std::string& { return c.output.dir; }));
    f.push_back(choice("output.encoding", [](RunConfig& c) -> EmbeddingEncoding& { return c.output.encoding; },
                       encoding_name, parse_encoding));
    f.push_back(text("output.dump_associations", [](RunConfig& c) -> std::string& { return c.output.dump_associations; }));
    f.push_back(boolean("output.verbose", [](RunConfig& c) -> bool& { return c.output.verbose; }));
    return f;
  }();
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

void flatten(const json& node, const std::string& prefix, json& out) {
  for (auto it = node.begin(); it != node.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object())
      flatten(*it, key, out);
    else
      out[key] = *it;
  }
}

template <class T>
T parse_integer(const std::string& key, const std::string& s) {
  T v{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw ConfigError("config: '" + key + "': bad integer '" + s + "'");
  return v;
}

}  // namespace

json RunConfig::to_json() const {
  RunConfig copy = *this;
  json out = json::object();
  for (const auto& f : fields()) out[f.key] = f.get(copy);
  return out;
}

RunConfig RunConfig::from_json(const json& flat) {
  if (!flat.is_object()) throw ConfigError("config: expected a JSON object");
  RunConfig cfg;
  for (auto it = flat.begin(); it != flat.end(); ++it) {
    const Field* f = find_field(it.key());
    if (!f) throw ConfigError("config: unknown key '" + it.key() + "'");
    f->set(cfg, *it);
  }
  return cfg;
}

void RunConfig::validate() const {
  if (data_path.empty()) synth.validate();
  if (batch_size != 0 && batch_size != train.batch_size())
    throw ConfigError("config: train.batch_size (" + std::to_string(batch_size) + ") must equal batch_p * batch_k (" +
                      std::to_string(train.batch_size()) + ")");
  if (eval.query_per_camera < 1 || eval.gallery_per_camera < 1)
    throw ConfigError("config: eval.query_per_camera and eval.gallery_per_camera must be >= 1");
  if (eval.query.empty() != eval.gallery.empty())
    throw ConfigError("config: eval.query and eval.gallery must be given together");
  train.validate(data_path.empty() ? synth.num_cameras : 0);
}

json default_config_json() { return RunConfig{}.to_json(); }

json load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config file " + path.string() + ": expected a JSON object");
  json flat = json::object();
  flatten(doc, "", flat);
  return flat;
}

void apply_override(json& flat, const std::string& key, const std::string& text) {
  const Field* f = find_field(key);
  if (!f) throw ConfigError("config: unknown key '" + key + "'");
  RunConfig probe;
  const json def = f->get(probe);
  json value;
  if (def.is_boolean()) {
    if (text == "true" || text == "1")
      value = true;
    else if (text == "false" || text == "0")
      value = false;
    else
      throw ConfigError("config: '" + key + "' expects true or false, got '" + text + "'");
  } else if (def.is_number_unsigned()) {
    value = parse_integer<std::uint64_t>(key, text);
  } else if (def.is_number_integer()) {
    value = parse_integer<long long>(key, text);
  } else if (def.is_number_float()) {
    double v = 0.0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || end != text.data() + text.size())
      throw ConfigError("config: '" + key + "': bad number '" + text + "'");
    value = v;
  } else {
    value = text;
  }
  flat[key] = value;
}

RunConfig resolve_config(const std::optional<std::filesystem::path>& file,
                         std::span<const std::pair<std::string, std::string>> overrides) {
  json flat = default_config_json();
  if (file) {
    const json loaded = load_config_file(*file);
    for (const auto& [k, v] : loaded.items()) {
      if (!find_field(k)) throw ConfigError("config file " + file->string() + ": unknown key '" + k + "'");
      flat[k] = v;
    }
  }
  for (const auto& [k, v] : overrides) apply_override(flat, k, v);
  RunConfig cfg = RunConfig::from_json(flat);
  cfg.validate();
  return cfg;
}

void write_config(const std::filesystem::path& path, const RunConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << cfg.to_json().dump(2) << '\n';
}

}  // namespace o2cap
