#include "coclust/run.hpp"

#include <glob.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "coclust/alignment.hpp"
#include "coclust/checkpoint.hpp"
#include "coclust/clustering.hpp"
#include "coclust/error.hpp"
#include "coclust/skipgram.hpp"

namespace coclust {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kWalkStream = 0x77616c6b;
constexpr std::uint64_t kSkipGramStream = 0x73676e73;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<std::size_t> ranked_column(const Tensor& q, std::size_t column) {
  std::vector<std::size_t> order(q.rows());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return q(a, column) > q(b, column); });
  return order;
}

std::optional<double> safe_silhouette(const Tensor& x, const Tensor& q) {
  try {
    return silhouette(x, hard_assignments(q));
  } catch (const UsageError&) {
    return std::nullopt;
  }
}

std::vector<std::string> ids_of(const Hypergraph& g, const std::vector<std::size_t>& edges) {
  std::vector<std::string> out;
  for (std::size_t e : edges) out.push_back(g.edge_ids()[e]);
  return out;
}

}  // namespace

Dataset load_dataset(const fs::path& dir) {
  Dataset d;
  d.dir = dir;
  d.visits = read_visits(dir / "visits.jsonl");
  d.graph = Hypergraph::build(d.visits);
  if (fs::exists(dir / "descriptions.csv")) d.descriptions = read_descriptions(dir / "descriptions.csv");
  if (fs::exists(dir / "ground_truth.csv")) d.truth = read_ground_truth(dir / "ground_truth.csv");
  return d;
}

BuiltFeatures build_features(const Dataset& data, const FeatureConfig& c, std::uint64_t seed) {
  const Hypergraph& g = data.graph;
  WalkCorpus walks =
      random_walks(g, c.walk_length, c.walks_per_node, mix_seed(seed, kWalkStream));
  SkipGramConfig sg;
  sg.dim = c.structural_dim;
  sg.window = c.window;
  sg.negatives = c.negatives;
  sg.epochs = c.skipgram_epochs;
  sg.learning_rate = c.skipgram_lr;
  sg.seed = mix_seed(seed, kSkipGramStream);
  EmbeddingTable structural = train_skipgram(walks, g.node_ids(), sg).table;

  BuiltFeatures out;
  EmbeddingTable text;
  fs::path vectors;
  if (!c.text_vectors.empty()) {
    vectors = fs::path(c.text_vectors).is_absolute() ? fs::path(c.text_vectors)
                                                     : data.dir / c.text_vectors;
  } else if (fs::exists(data.dir / "text_vectors.jsonl")) {
    vectors = data.dir / "text_vectors.jsonl";
  }
  if (!c.text_features) {
    text.vocab = g.node_ids();
    text.source = EmbeddingSource::textual;
    text.matrix = Tensor::matrix(g.node_count(), c.text_dim);
    out.text_source = "zeros";
  } else if (!vectors.empty()) {
    TextLoadResult loaded = load_text_embeddings(vectors, g.node_ids(), data.descriptions, c.text_dim);
    text = std::move(loaded.table);
    out.text_fallbacks = loaded.fallback_count;
    out.text_source = vectors.string();
  } else {
    text = fallback_text_embeddings(g.node_ids(), data.descriptions, c.text_dim);
    out.text_fallbacks = g.node_count();
    out.text_source = "hashed";
  }
  out.table = concat_features(structural, text);
  return out;
}

RunConfig resolve_config(RunConfig config, const Hypergraph& g, const FeatureTable& features) {
  const std::size_t width = features.matrix.cols();
  if (config.model.input_dim != 0 && config.model.input_dim != width) {
    throw UsageError("input_dim " + std::to_string(config.model.input_dim) +
                     " does not match feature width " + std::to_string(width));
  }
  if (config.model.label_width != 0 && config.model.label_width != g.label_width()) {
    throw UsageError("label_width " + std::to_string(config.model.label_width) +
                     " does not match data label width " + std::to_string(g.label_width()));
  }
  config.model.input_dim = width;
  config.model.label_width = g.label_width();
  config.model.validate();
  return config;
}

EvalReport evaluate_split(const Hypergraph& g, const Inference& inference,
                          std::span<const std::size_t> edges) {
  if (edges.empty()) throw UsageError("evaluate_split: the split has no hyperedges");
  Tensor probs = Tensor::matrix(edges.size(), inference.probs.cols());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    for (std::size_t s = 0; s < probs.cols(); ++s) probs(i, s) = inference.probs(edges[i], s);
  }
  EvalReport report = evaluate_predictions(probs, label_matrix(g, edges));
  if (inference.nodes) {
    report.silhouette_nodes = safe_silhouette(inference.node_embeddings, inference.nodes->assignments);
    report.silhouette_hyperedges =
        safe_silhouette(inference.edge_embeddings, inference.edges->assignments);
  }
  return report;
}

RecoveryScores recovery_scores(const Hypergraph& g, const GroundTruth& truth,
                               const Inference& inference) {
  if (!inference.nodes) throw UsageError("recovery_scores: model has no cluster state");
  RecoveryScores out;
  const auto node_hard = hard_assignments(inference.nodes->assignments);
  const auto edge_hard = hard_assignments(inference.edges->assignments);
  std::vector<std::size_t> pred, planted;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    auto it = truth.concepts.find(g.node_ids()[i]);
    if (it == truth.concepts.end() || it->second < 0) continue;
    pred.push_back(node_hard[i]);
    planted.push_back(static_cast<std::size_t>(it->second));
  }
  out.node_items = pred.size();
  if (pred.size() >= 2) out.node_ari = adjusted_rand_index(pred, planted);
  pred.clear();
  planted.clear();
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    auto it = truth.visits.find(g.edge_ids()[e]);
    if (it == truth.visits.end() || it->second < 0) continue;
    pred.push_back(edge_hard[e]);
    planted.push_back(static_cast<std::size_t>(it->second));
  }
  out.edge_items = pred.size();
  if (pred.size() >= 2) out.edge_ari = adjusted_rand_index(pred, planted);
  return out;
}

namespace {

nlohmann::json recovery_json(const RecoveryScores& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"node_ari", opt(r.node_ari)},
          {"hyperedge_ari", opt(r.edge_ari)},
          {"node_items", r.node_items},
          {"hyperedge_items", r.edge_items}};
}

std::vector<std::size_t> edges_from_ids(const Hypergraph& g, const nlohmann::json& ids) {
  std::map<std::string, std::size_t> index;
  for (std::size_t e = 0; e < g.edge_count(); ++e) index[g.edge_ids()[e]] = e;
  std::vector<std::size_t> out;
  for (const auto& id : ids) {
    auto it = index.find(id.get<std::string>());
    if (it == index.end()) throw DataError("run split names unknown visit " + id.get<std::string>());
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

RunOutcome run_training(const fs::path& data_dir, RunConfig config, const fs::path& out_dir) {
  Dataset data = load_dataset(data_dir);
  const Hypergraph& g = data.graph;
  BuiltFeatures features = build_features(data, config.features, config.train.seed);
  config = resolve_config(std::move(config), g, features.table);
  fs::create_directories(out_dir);
  write_text_file(out_dir / "config.txt", to_text(config));

  const Tensor& x = features.table.matrix;
  SplitIndex split = split_dataset(g, config.train.split, config.train.seed);
  RunOutcome outcome;
  outcome.config = config;
  outcome.training = train(g, x, CoClusterModel::init(config.model, config.train), config.train, split);
  TrainResult& r = outcome.training;

  write_metrics_csv(out_dir / "metrics.csv", r.history);
  save_checkpoint(out_dir / "best.ckpt", pack_model(config, r.best, x, r.best_epoch));
  save_checkpoint(out_dir / "final.ckpt", pack_model(config, r.last, x, config.train.epochs));

  Inference inference = infer(r.best, g, x, config.train.cluster_layer);
  outcome.test = evaluate_split(g, inference, split.test);
  write_json(out_dir / "report.json", to_json(outcome.test));
  write_slot_csv(out_dir / "slots_test.csv", outcome.test);
  if (inference.nodes) {
    write_cluster_csv(out_dir / "clusters.csv", g, inference);
    write_alignment_csv(out_dir / "alignment.csv",
                        alignment_report(inference.node_projection, inference.edge_projection));
    write_pca_csv(out_dir / "pca2d.csv", g, inference);
    if (data.truth) {
      outcome.recovery = recovery_scores(g, *data.truth, inference);
      write_json(out_dir / "recovery.json", recovery_json(*outcome.recovery));
    }
  }
  nlohmann::json run{{"data_dir", fs::absolute(data_dir).string()},
                     {"seed", config.train.seed},
                     {"best_epoch", r.best_epoch},
                     {"epochs", config.train.epochs},
                     {"text_source", features.text_source},
                     {"text_fallbacks", features.text_fallbacks},
                     {"split",
                      {{"train", ids_of(g, split.train)},
                       {"validation", ids_of(g, split.validation)},
                       {"test", ids_of(g, split.test)}}}};
  write_json(out_dir / "run.json", run);
  return outcome;
}

EvalReport evaluate_run(const fs::path& rundir, const std::string& split) {
  std::string key = split == "val" ? "validation" : split;
  if (key != "train" && key != "validation" && key != "test") {
    throw UsageError("unknown split '" + split + "' (train, validation or test)");
  }
  const nlohmann::json run = read_json(rundir / "run.json");
  Dataset data = load_dataset(run.at("data_dir").get<std::string>());
  LoadedModel loaded = unpack_model(load_checkpoint(rundir / "best.ckpt"));
  if (loaded.features.rows() != data.graph.node_count()) {
    throw DataError("checkpoint features cover " + std::to_string(loaded.features.rows()) +
                    " concepts but the data has " + std::to_string(data.graph.node_count()));
  }
  Inference inference =
      infer(loaded.model, data.graph, loaded.features, loaded.config.train.cluster_layer);
  const std::vector<std::size_t> edges = edges_from_ids(data.graph, run.at("split").at(key));
  EvalReport report = evaluate_split(data.graph, inference, edges);
  write_json(rundir / ("eval_" + key + ".json"), to_json(report));
  return report;
}

ClusterReport export_cluster_report(const Hypergraph& g, const DescriptionMap& descriptions,
                                    const Inference& inference, std::size_t top_concepts,
                                    std::size_t top_visits) {
  if (!inference.nodes || !inference.edges) {
    throw UsageError("cluster report: the model has no cluster state");
  }
  const std::size_t k = inference.nodes->clusters;
  if (k < 2) throw UsageError("cluster report: need K >= 2");
  const Tensor& qv = inference.nodes->assignments;
  const Tensor& qe = inference.edges->assignments;
  const std::vector<std::size_t> matched =
      align_positive(inference.node_projection, inference.edge_projection);
  const Segments& segments = g.edge_segments();
  const std::size_t heads =
      segments.total() == 0 ? 1 : inference.edge_attention.size() / segments.total();
  auto describe = [&](const std::string& code) {
    auto it = descriptions.find(code);
    return it == descriptions.end() ? std::string() : it->second;
  };

  ClusterReport report;
  report.top_concepts = top_concepts;
  report.top_visits = top_visits;
  for (std::size_t c = 0; c < k; ++c) {
    ReportCluster cluster;
    cluster.cluster = c;
    cluster.matched_edge_cluster = matched[c];
    const auto nodes = ranked_column(qv, c);
    for (std::size_t i = 0; i < std::min(top_concepts, nodes.size()); ++i) {
      const std::string& code = g.node_ids()[nodes[i]];
      cluster.concepts.push_back({code, describe(code), qv(nodes[i], c)});
    }
    const auto edges = ranked_column(qe, matched[c]);
    double outcome = 0.0;
    std::size_t labeled = 0;
    for (std::size_t i = 0; i < std::min(top_visits, edges.size()); ++i) {
      const std::size_t e = edges[i];
      ReportVisit visit;
      visit.visit_id = g.edge_ids()[e];
      visit.probability = qe(e, matched[c]);
      if (g.is_labeled(e)) {
        double positives = 0.0;
        for (std::uint8_t y : g.labels(e)) {
          visit.labels.push_back(y);
          positives += y;
        }
        outcome += positives / static_cast<double>(g.label_width());
        ++labeled;
      }
      const auto members = g.members(e);
      const std::size_t base = segments.offsets[e];
      std::vector<double> weight(members.size(), 0.0);
      for (std::size_t p = 0; p < members.size(); ++p) {
        for (std::size_t h = 0; h < heads; ++h) {
          weight[p] += inference.edge_attention[(base + p) * heads + h];
        }
        weight[p] /= static_cast<double>(heads);
      }
      std::vector<std::size_t> order(members.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return weight[a] > weight[b]; });
      for (std::size_t p = 0; p < std::min(kAttendedConcepts, order.size()); ++p) {
        const std::string& code = g.node_ids()[members[order[p]]];
        visit.attended.push_back({code, describe(code), weight[order[p]]});
      }
      cluster.visits.push_back(std::move(visit));
    }
    if (labeled > 0) cluster.outcome_rate = outcome / static_cast<double>(labeled);
    report.clusters.push_back(std::move(cluster));
  }
  return report;
}

nlohmann::json to_json(const ClusterReport& report) {
  auto concept_json = [](const ReportConcept& c) {
    return nlohmann::json{{"code", c.code}, {"description", c.description}, {"score", c.score}};
  };
  nlohmann::json clusters = nlohmann::json::array();
  for (const ReportCluster& c : report.clusters) {
    nlohmann::json concepts = nlohmann::json::array();
    for (const auto& x : c.concepts) concepts.push_back(concept_json(x));
    nlohmann::json visits = nlohmann::json::array();
    for (const ReportVisit& v : c.visits) {
      nlohmann::json attended = nlohmann::json::array();
      for (const auto& x : v.attended) attended.push_back(concept_json(x));
      visits.push_back({{"visit_id", v.visit_id},
                        {"probability", v.probability},
                        {"labels", v.labels},
                        {"attended_concepts", attended}});
    }
    clusters.push_back({{"cluster", c.cluster},
                        {"matched_hyperedge_cluster", c.matched_edge_cluster},
                        {"concepts", concepts},
                        {"visits", visits},
                        {"outcome_rate", c.outcome_rate ? nlohmann::json(*c.outcome_rate)
                                                        : nlohmann::json(nullptr)}});
  }
  return {{"top_concepts", report.top_concepts},
          {"top_visits", report.top_visits},
          {"clusters", clusters}};
}

std::string to_table(const ClusterReport& report) {
  std::ostringstream out;
  char buf[64];
  for (const ReportCluster& c : report.clusters) {
    out << "Subtype #" << c.cluster + 1 << " (hyperedge cluster " << c.matched_edge_cluster + 1;
    if (c.outcome_rate) {
      std::snprintf(buf, sizeof buf, ", outcome rate %.3f", *c.outcome_rate);
      out << buf;
    }
    out << ")\n  concepts:\n";
    for (const ReportConcept& x : c.concepts) {
      std::snprintf(buf, sizeof buf, "%.4f", x.score);
      out << "    " << x.code << "  " << buf << "  " << x.description << '\n';
    }
    out << "  visits:\n";
    for (const ReportVisit& v : c.visits) {
      std::snprintf(buf, sizeof buf, "%.4f", v.probability);
      out << "    " << v.visit_id << "  " << buf << "  labels [";
      for (std::size_t i = 0; i < v.labels.size(); ++i) out << (i ? "," : "") << v.labels[i];
      out << "]\n";
      for (const ReportConcept& x : v.attended) {
        std::snprintf(buf, sizeof buf, "%.4f", x.score);
        out << "      " << x.code << "  " << buf << "  " << x.description << '\n';
      }
    }
  }
  return out.str();
}

ClusterReport report_run(const fs::path& rundir, std::size_t top_concepts,
                         std::size_t top_visits) {
  const nlohmann::json run = read_json(rundir / "run.json");
  Dataset data = load_dataset(run.at("data_dir").get<std::string>());
  LoadedModel loaded = unpack_model(load_checkpoint(rundir / "best.ckpt"));
  Inference inference =
      infer(loaded.model, data.graph, loaded.features, loaded.config.train.cluster_layer);
  ClusterReport report =
      export_cluster_report(data.graph, data.descriptions, inference, top_concepts, top_visits);
  write_json(rundir / "cluster_report.json", to_json(report));
  write_text_file(rundir / "cluster_report.txt", to_table(report));
  return report;
}

std::vector<MetricSummary> aggregate_reports(const std::vector<EvalReport>& reports) {
  std::vector<std::pair<std::string, std::vector<double>>> series = {
      {"accuracy", {}}, {"auroc", {}}, {"aupr", {}}, {"macro_f1", {}},
      {"silhouette_nodes", {}}, {"silhouette_hyperedges", {}}};
  for (const EvalReport& r : reports) {
    series[0].second.push_back(r.accuracy);
    series[1].second.push_back(r.auroc);
    series[2].second.push_back(r.aupr);
    series[3].second.push_back(r.macro_f1);
    if (r.silhouette_nodes) series[4].second.push_back(*r.silhouette_nodes);
    if (r.silhouette_hyperedges) series[5].second.push_back(*r.silhouette_hyperedges);
  }
  std::vector<MetricSummary> out;
  for (const auto& [name, values] : series) {
    if (values.empty()) continue;
    MetricSummary s;
    s.metric = name;
    s.runs = values.size();
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.runs);
    if (s.runs > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - s.mean) * (v - s.mean);
      s.stddev = std::sqrt(ss / static_cast<double>(s.runs - 1));
    }
    out.push_back(s);
  }
  return out;
}

std::vector<MetricSummary> aggregate_runs(const std::string& pattern,
                                          std::vector<fs::path>* matched) {
  glob_t result{};
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &result);
  std::vector<fs::path> dirs;
  if (rc == 0) {
    for (std::size_t i = 0; i < result.gl_pathc; ++i) {
      fs::path p = result.gl_pathv[i];
      if (fs::exists(p / "report.json")) dirs.push_back(p);
    }
  }
  globfree(&result);
  if (dirs.empty()) throw DataError("no run directories with report.json match " + pattern);
  std::vector<EvalReport> reports;
  for (const fs::path& d : dirs) reports.push_back(eval_report_from_json(read_json(d / "report.json")));
  if (matched) *matched = dirs;
  return aggregate_reports(reports);
}

std::string format_summary(const std::vector<MetricSummary>& summary) {
  std::ostringstream out;
  char buf[128];
  for (const MetricSummary& s : summary) {
    std::snprintf(buf, sizeof buf, "%-22s %.4f ± %.4f  (n=%zu)\n", s.metric.c_str(), s.mean,
                  s.stddev, s.runs);
    out << buf;
  }
  return out.str();
}

Tensor pca_2d(const Tensor& points) {
  const std::size_t n = points.rows(), d = points.cols();
  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x(i, j) = points(i, j);
  }
  x.rowwise() -= x.colwise().mean();
  Tensor out = Tensor::matrix(n, 2);
  if (n < 2) return out;
  Eigen::MatrixXd cov = x.transpose() * x / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  for (std::size_t axis = 0; axis < std::min<std::size_t>(2, d); ++axis) {
    Eigen::VectorXd v = solver.eigenvectors().col(static_cast<Eigen::Index>(d - 1 - axis));
    Eigen::Index largest = 0;
    v.cwiseAbs().maxCoeff(&largest);
    if (v(largest) < 0) v = -v;
    Eigen::VectorXd coords = x * v;
    for (std::size_t i = 0; i < n; ++i) out(i, axis) = coords(static_cast<Eigen::Index>(i));
  }
  return out;
}

void write_metrics_csv(const fs::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream out = open_output(path);
  out << "epoch,phase,total,cls,node_kl,edge_kl,align,node_kl_at_refresh,edge_kl_at_refresh,"
         "val_auroc\n";
  for (const EpochRecord& r : history) {
    out << r.epoch << ',' << r.phase << ',' << fmt(r.total) << ',' << fmt(r.cls) << ','
        << fmt(r.node_kl) << ',' << fmt(r.edge_kl) << ',' << fmt(r.align) << ','
        << fmt(r.node_kl_at_refresh) << ',' << fmt(r.edge_kl_at_refresh) << ','
        << (r.val_auroc ? fmt(*r.val_auroc) : "") << '\n';
  }
}

void write_cluster_csv(const fs::path& path, const Hypergraph& g, const Inference& inference) {
  if (!inference.nodes) throw UsageError("cluster export: the model has no cluster state");
  std::ofstream out = open_output(path);
  const std::size_t k = inference.nodes->clusters;
  out << "item_id,domain,cluster";
  for (std::size_t c = 0; c < k; ++c) out << ",q_" << c + 1;
  out << '\n';
  auto emit = [&](const std::vector<std::string>& ids, const ClusterState& s) {
    const auto hard = hard_assignments(s.assignments);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      out << csv_escape(ids[i]) << ',' << to_string(s.domain) << ',' << hard[i];
      for (std::size_t c = 0; c < k; ++c) out << ',' << fmt(s.assignments(i, c));
      out << '\n';
    }
  };
  emit(g.node_ids(), *inference.nodes);
  emit(g.edge_ids(), *inference.edges);
}

void write_pca_csv(const fs::path& path, const Hypergraph& g, const Inference& inference) {
  if (!inference.nodes) throw UsageError("PCA export: the model has no cluster state");
  const Tensor& xv = inference.node_embeddings;
  const Tensor& xe = inference.edge_embeddings;
  Tensor joined = Tensor::matrix(xv.rows() + xe.rows(), xv.cols());
  std::copy(xv.storage().begin(), xv.storage().end(), joined.storage().begin());
  std::copy(xe.storage().begin(), xe.storage().end(),
            joined.storage().begin() + static_cast<std::ptrdiff_t>(xv.size()));
  const Tensor coords = pca_2d(joined);
  const auto node_hard = hard_assignments(inference.nodes->assignments);
  const auto edge_hard = hard_assignments(inference.edges->assignments);
  std::ofstream out = open_output(path);
  out << "item_id,domain,cluster,x,y\n";
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    out << csv_escape(g.node_ids()[i]) << ",node," << node_hard[i] << ',' << fmt(coords(i, 0))
        << ',' << fmt(coords(i, 1)) << '\n';
  }
  for (std::size_t e = 0; e < xe.rows(); ++e) {
    const std::size_t r = xv.rows() + e;
    out << csv_escape(g.edge_ids()[e]) << ",hyperedge," << edge_hard[e] << ','
        << fmt(coords(r, 0)) << ',' << fmt(coords(r, 1)) << '\n';
  }
}

}  // namespace coclust
