#include "o2cap/pipeline.hpp"

#include <cstdio>
#include <sstream>

#include "o2cap/error.hpp"

namespace o2cap {

using nlohmann::json;

RunData load_run_data(const RunConfig& cfg) {
  RunData d;
  if (cfg.data_path.empty()) {
    d.train = synthesize(cfg.synth);
  } else {
    d.train = load_embeddings(cfg.data_path);
  }
  if (!cfg.eval.query.empty()) {
    d.holdout = QueryGallery{load_embeddings(cfg.eval.query), load_embeddings(cfg.eval.gallery)};
  } else if (cfg.data_path.empty()) {
    d.holdout = synthesize_holdout(cfg.synth, cfg.eval.query_per_camera, cfg.eval.gallery_per_camera);
  }
  if (d.holdout && (d.holdout->query.dim() != d.train.dim() || d.holdout->gallery.dim() != d.train.dim()))
    throw ShapeError("query/gallery dimension differs from the training set");
  TrainConfig probe = cfg.train;
  if (probe.assoc.k2 == 0) probe.assoc.k2 = default_k2(d.train);
  probe.validate(d.train.num_cameras());
  return d;
}

RetrievalMetrics evaluate_model(const EmbeddingModel& model, const Dataset& train, const QueryGallery& holdout,
                                int neighbors) {
  Dataset q = holdout.query;
  Dataset g = holdout.gallery;
  q.features = model.extend(train.features, holdout.query.features, neighbors);
  g.features = model.extend(train.features, holdout.gallery.features, neighbors);
  return evaluate_retrieval(q, g);
}

Analysis analyze(const EmbeddingModel& model, const Dataset& train, const TrainConfig& cfg,
                 const QueryGallery* holdout) {
  TrainConfig resolved = cfg;
  if (resolved.assoc.k2 == 0) resolved.assoc.k2 = default_k2(train);
  Analysis a;
  const Dataset view{model.table, train.cameras, train.true_ids};
  const Partition part = build_partition(model.table, view, resolved);
  a.clusters = part.retained.num_clusters;
  a.proxies = part.proxies.size();
  a.outliers = train.size() - part.retained.size();
  if (train.has_ground_truth()) {
    a.clustering = clustering_quality(part.assignment.labels, train.true_ids);
    const MemoryBank bank =
        MemoryBank::from_partition(model.table, part.proxies.members(), MemoryLevel::proxy, resolved.mu);
    const auto assoc = collect_associations(model, part.labels, part.retained, part.proxies, bank, resolved.assoc);
    a.association = association_stats(assoc.anchors, assoc.offline, assoc.online, part.proxies, train.true_ids);
  }
  if (holdout) a.retrieval = evaluate_model(model, train, *holdout, resolved.eval_neighbors);
  return a;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

json assoc_json(const AssociationStats& s) {
  return json{{"iou", s.iou},
              {"precision_offline", s.precision_offline},
              {"precision_online", s.precision_online},
              {"precision_union", s.precision_union},
              {"recall_offline", s.recall_offline},
              {"recall_online", s.recall_online},
              {"recall_union", s.recall_union},
              {"anchors", s.anchors}};
}

}  // namespace

std::string history_csv(std::span<const EpochReport> history) {
  std::ostringstream out;
  out << "epoch,loss,map,r1,iou,prec_off,prec_on,prec_union,rec_off,rec_on,rec_union,lr,clusters,proxies,outliers,"
         "ari\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << fmt(r.loss) << ',';
    if (r.retrieval) out << fmt(r.retrieval->map) << ',' << fmt(r.retrieval->r1) << ',';
    else out << ",,";
    if (r.association) {
      const auto& s = *r.association;
      out << fmt(s.iou) << ',' << fmt(s.precision_offline) << ',' << fmt(s.precision_online) << ','
          << fmt(s.precision_union) << ',' << fmt(s.recall_offline) << ',' << fmt(s.recall_online) << ','
          << fmt(s.recall_union) << ',';
    } else {
      out << ",,,,,,,";
    }
    out << fmt(r.lr) << ',' << r.clusters << ',' << r.proxies << ',' << r.outliers << ',';
    if (r.clustering) out << fmt(r.clustering->ari);
    out << '\n';
  }
  return out.str();
}

void write_history_csv(const std::filesystem::path& path, std::span<const EpochReport> history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << history_csv(history);
}

json metrics_json(const Analysis& a) {
  json m = json::object();
  if (a.retrieval) {
    m["map"] = a.retrieval->map;
    m["cmc"] = json{{"r1", a.retrieval->r1}, {"r5", a.retrieval->r5}, {"r10", a.retrieval->r10}};
    m["valid_queries"] = a.retrieval->valid_queries;
    m["skipped_queries"] = a.retrieval->skipped_queries;
  } else {
    m["map"] = nullptr;
    m["cmc"] = nullptr;
  }
  m["ari"] = a.clustering ? json(a.clustering->ari) : json(nullptr);
  m["purity"] = a.clustering ? json(a.clustering->purity) : json(nullptr);
  m["assoc"] = a.association ? assoc_json(*a.association) : json(nullptr);
  m["clusters"] = a.clusters;
  m["proxies"] = a.proxies;
  m["outliers"] = a.outliers;
  return m;
}

json history_json(std::span<const EpochReport> history) {
  json out = json::array();
  for (const auto& r : history) {
    json e{{"epoch", r.epoch},       {"lr", r.lr},           {"loss", r.loss},
           {"batches", r.batches},   {"clusters", r.clusters}, {"proxies", r.proxies},
           {"outliers", r.outliers}, {"batch_shrunk", r.batch_shrunk},
           {"memory_degeneracies", r.memory_degeneracies}};
    if (r.retrieval) e["map"] = r.retrieval->map, e["r1"] = r.retrieval->r1;
    if (r.clustering) e["ari"] = r.clustering->ari, e["purity"] = r.clustering->purity;
    if (r.association) e["assoc"] = assoc_json(*r.association);
    out.push_back(std::move(e));
  }
  return out;
}

void write_checkpoint(const std::filesystem::path& embeddings, const EmbeddingModel& model, const Dataset& train,
                      const RunConfig& cfg, std::span<const EpochReport> history) {
  save_embeddings(embeddings, Dataset{model.table, train.cameras, train.true_ids}, EmbeddingEncoding::binary);
  std::filesystem::path sidecar = embeddings;
  sidecar.replace_extension(".json");
  std::ofstream out(sidecar, std::ios::binary);
  if (!out) throw IoError("cannot write " + sidecar.string());
  out << json{{"config", cfg.to_json()}, {"history", history_json(history)}}.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& embeddings) {
  Checkpoint c;
  c.table = load_embeddings(embeddings);
  std::filesystem::path sidecar = embeddings;
  sidecar.replace_extension(".json");
  std::ifstream in(sidecar);
  if (!in) throw IoError("missing checkpoint sidecar " + sidecar.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("checkpoint sidecar " + sidecar.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("config"))
    throw ParseError("checkpoint sidecar " + sidecar.string() + ": no config object");
  c.config = RunConfig::from_json(doc["config"]);
  return c;
}

AssociationDump::AssociationDump(const std::filesystem::path& path) : stream_(path, std::ios::binary) {
  if (!stream_) throw IoError("cannot write " + path.string());
  stream_ << "epoch,batch,anchor,mode,positives,negatives\n";
}

void AssociationDump::on_batch(const BatchTrace& trace) {
  auto join = [](const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (k) s += ' ';
      s += std::to_string(v[k]);
    }
    return s;
  };
  const auto& anchors = trace.batch_data->anchors;
  for (auto results : {trace.offline, trace.online, trace.merged}) {
    for (std::size_t k = 0; k < results.size(); ++k) {
      stream_ << trace.epoch << ',' << trace.batch << ',' << anchors[k] << ',' << to_string(results[k].mode) << ','
              << join(results[k].positives) << ',' << join(results[k].negatives) << '\n';
    }
  }
}

}  // namespace o2cap
