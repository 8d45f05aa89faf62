// o2cap: synthesize data, train, evaluate and inspect checkpoints.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "o2cap/config.hpp"
#include "o2cap/error.hpp"
#include "o2cap/parallel.hpp"
#include "o2cap/pipeline.hpp"

namespace fs = std::filesystem;
using namespace o2cap;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct CommonArgs {
  std::string config;
  std::vector<std::pair<std::string, std::string>> overrides;
};

// Collects `--dotted.key value` and `--dotted.key=value` pairs left over by CLI11.
std::vector<std::pair<std::string, std::string>> dotted_overrides(const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& a = extras[i];
    if (a.rfind("--", 0) != 0 || a.size() < 3) throw ConfigError("unexpected argument '" + a + "'");
    std::string key = a.substr(2);
    if (const auto eq = key.find('='); eq != std::string::npos) {
      out.emplace_back(key.substr(0, eq), key.substr(eq + 1));
      continue;
    }
    if (i + 1 >= extras.size()) throw ConfigError("missing value for '" + a + "'");
    out.emplace_back(key, extras[++i]);
  }
  return out;
}

RunConfig resolve(const CommonArgs& args) {
  std::optional<fs::path> file;
  if (!args.config.empty()) file = args.config;
  return resolve_config(file, args.overrides);
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir);
  return fs::path(dir);
}

void print_summary(const Dataset& d) {
  std::set<int> ids(d.true_ids.begin(), d.true_ids.end());
  std::map<int, std::set<int>> cams;
  for (std::size_t i = 0; i < d.size(); ++i) cams[d.true_ids[i]].insert(d.cameras[i]);
  double cid = 0.0;
  for (const auto& [id, c] : cams) cid += static_cast<double>(c.size());
  const double n_ids = static_cast<double>(ids.size());
  std::printf("N=%zu C=%d IDs=%zu CID=%.2f IID=%.2f d=%zu\n", d.size(), d.num_cameras(), ids.size(),
              d.has_ground_truth() ? cid / n_ids : 0.0,
              d.has_ground_truth() ? static_cast<double>(d.size()) / n_ids : 0.0, d.dim());
}

void print_metrics(const Analysis& a) {
  if (a.retrieval)
    std::printf("mAP=%.4f R1=%.4f R5=%.4f R10=%.4f\n", a.retrieval->map, a.retrieval->r1, a.retrieval->r5,
                a.retrieval->r10);
  if (a.clustering) std::printf("ARI=%.4f purity=%.4f clusters=%d proxies=%zu outliers=%zu\n", a.clustering->ari,
                                a.clustering->purity, a.clusters, a.proxies, a.outliers);
  if (a.association)
    std::printf("IoU=%.4f prec(off/on/union)=%.4f/%.4f/%.4f rec(off/on/union)=%.4f/%.4f/%.4f\n",
                a.association->iou, a.association->precision_offline, a.association->precision_online,
                a.association->precision_union, a.association->recall_offline, a.association->recall_online,
                a.association->recall_union);
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

int cmd_synth(const CommonArgs& args, std::string out_file) {
  RunConfig cfg = resolve(args);
  const fs::path target = out_file.empty() ? prepare_dir(cfg.output.dir) / "dataset.o2eb" : fs::path(out_file);
  const Dataset d = synthesize(cfg.synth);
  save_embeddings(target, d, cfg.output.encoding);
  write_config(target.parent_path() / "config.resolved.json", cfg);
  print_summary(d);
  std::printf("wrote %s\n", target.string().c_str());
  return 0;
}

int cmd_train(const CommonArgs& args) {
  RunConfig cfg = resolve(args);
  const RunData data = load_run_data(cfg);
  const fs::path dir = prepare_dir(cfg.output.dir);

  std::unique_ptr<AssociationDump> dump;
  if (!cfg.output.dump_associations.empty()) dump = std::make_unique<AssociationDump>(cfg.output.dump_associations);

  Trainer trainer(data.train, cfg.train);
  trainer.set_observer(dump.get());
  if (data.holdout) {
    trainer.set_evaluator([&](const EmbeddingModel& m) {
      return evaluate_model(m, data.train, *data.holdout, cfg.train.eval_neighbors);
    });
  }
  std::vector<EpochReport> history;
  bool warned = false;
  for (int e = 0; e < cfg.train.max_epochs; ++e) {
    history.push_back(trainer.train_epoch());
    const EpochReport& r = history.back();
    if (r.batch_shrunk && !warned) {
      std::fprintf(stderr, "warning: fewer proxies than batch_p; batches shrunk\n");
      warned = true;
    }
    if (cfg.output.verbose)
      std::fprintf(stderr, "epoch %d lr=%.4g loss=%.4f clusters=%d proxies=%zu outliers=%zu mAP=%s\n", r.epoch, r.lr,
                   r.loss, r.clusters, r.proxies, r.outliers,
                   r.retrieval ? std::to_string(r.retrieval->map).c_str() : "-");
  }

  // Store the resolved k2 so the checkpoint is self-contained.
  cfg.train = trainer.config();
  write_config(dir / "config.resolved.json", cfg);
  write_checkpoint(dir / "checkpoint.o2eb", trainer.model(), data.train, cfg, history);
  write_history_csv(dir / "history.csv", history);
  const Analysis a = analyze(trainer.model(), data.train, cfg.train, data.holdout ? &*data.holdout : nullptr);
  write_json(dir / "metrics.json", metrics_json(a));
  print_metrics(a);
  std::printf("wrote %s\n", dir.string().c_str());
  return 0;
}

// Shared by eval and stats: the checkpoint's config with command-line overrides on top.
RunConfig checkpoint_config(const Checkpoint& ck, const CommonArgs& args) {
  nlohmann::json flat = ck.config.to_json();
  for (const auto& [k, v] : args.overrides) apply_override(flat, k, v);
  RunConfig cfg = RunConfig::from_json(flat);
  cfg.validate();
  return cfg;
}

EmbeddingModel checkpoint_model(const Checkpoint& ck, const Dataset& train) {
  if (ck.table.size() != train.size() || ck.table.dim() != train.dim())
    throw ShapeError("checkpoint table does not match its training set");
  return EmbeddingModel{ck.table.features};
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint) {
  if (!fs::exists(checkpoint)) throw IoError("checkpoint not found: " + checkpoint);
  const Checkpoint ck = load_checkpoint(checkpoint);
  const RunConfig cfg = checkpoint_config(ck, args);
  const RunData data = load_run_data(cfg);
  if (!data.holdout) throw ConfigError("eval: no query/gallery split (set eval.query and eval.gallery)");
  const EmbeddingModel model = checkpoint_model(ck, data.train);
  const fs::path dir = prepare_dir(cfg.output.dir);
  const Analysis a = analyze(model, data.train, cfg.train, &*data.holdout);
  write_config(dir / "config.resolved.json", cfg);
  write_json(dir / "metrics.json", metrics_json(a));
  print_metrics(a);
  return 0;
}

int cmd_stats(const CommonArgs& args, const std::string& checkpoint) {
  if (!fs::exists(checkpoint)) throw IoError("checkpoint not found: " + checkpoint);
  const Checkpoint ck = load_checkpoint(checkpoint);
  const RunConfig cfg = checkpoint_config(ck, args);
  const RunData data = load_run_data(cfg);
  const EmbeddingModel model = checkpoint_model(ck, data.train);
  const fs::path dir = prepare_dir(cfg.output.dir);
  const Analysis a = analyze(model, data.train, cfg.train, nullptr);
  const Dataset view{model.table, data.train.cameras, data.train.true_ids};
  const Partition part = build_partition(model.table, view, cfg.train);
  write_assignment_csv(dir / "assignment.csv", part.labels);
  write_config(dir / "config.resolved.json", cfg);
  write_json(dir / "stats.json", metrics_json(a));
  print_metrics(a);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  configure_threads_from_env();

  CLI::App app{"o2cap: camera-aware proxy contrastive learning on embedding tables"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string out_file, checkpoint, loss_mode, query, gallery, out_dir;
  int epochs = -1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config, "JSON config file (flat dotted keys or nested objects)");
    sub->allow_extras();
    sub->footer("Any config key can be overridden with --<dotted.key> <value>, e.g. --train.lr 4.");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic embedding dataset");
  add_common(synth);
  synth->add_option("--out", out_file, "output embedding file (default <output.dir>/dataset.o2eb)");

  auto* train = app.add_subcommand("train", "train an embedding table and write checkpoint, history and metrics");
  add_common(train);
  train->add_option("--loss-mode", loss_mode, "base|base2|off|on|o2cap|merge|cap");
  train->add_option("--epochs", epochs, "number of epochs");
  train->add_option("--out", out_dir, "output directory");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a query/gallery split");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint, "checkpoint embedding file")->required();
  eval->add_option("--query", query, "query embedding file");
  eval->add_option("--gallery", gallery, "gallery embedding file");
  eval->add_option("--out", out_dir, "output directory");

  auto* stats = app.add_subcommand("stats", "recompute clustering and association statistics from a checkpoint");
  add_common(stats);
  stats->add_option("--checkpoint", checkpoint, "checkpoint embedding file")->required();
  stats->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    args.overrides = dotted_overrides(sub->remaining());
    if (!loss_mode.empty()) args.overrides.emplace_back("train.loss_mode", loss_mode);
    if (epochs >= 0) args.overrides.emplace_back("train.epochs", std::to_string(epochs));
    if (!query.empty()) args.overrides.emplace_back("eval.query", query);
    if (!gallery.empty()) args.overrides.emplace_back("eval.gallery", gallery);
    if (!out_dir.empty()) args.overrides.emplace_back("output.dir", out_dir);

    if (sub == synth) return cmd_synth(args, out_file);
    if (sub == train) return cmd_train(args);
    if (sub == eval) return cmd_eval(args, checkpoint);
    return cmd_stats(args, checkpoint);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitUsage;
  } catch (const IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kExitUsage;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
}
