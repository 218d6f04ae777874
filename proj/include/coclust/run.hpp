#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "coclust/config.hpp"
#include "coclust/features.hpp"
#include "coclust/hypergraph.hpp"
#include "coclust/io.hpp"
#include "coclust/metrics.hpp"
#include "coclust/trainer.hpp"

namespace coclust {

/// visits.jsonl plus the optional descriptions.csv and ground_truth.csv of a
/// data directory.
struct Dataset {
  std::filesystem::path dir;
  std::vector<VisitRecord> visits;
  Hypergraph graph;
  DescriptionMap descriptions;
  std::optional<GroundTruth> truth;
};

Dataset load_dataset(const std::filesystem::path& dir);

struct BuiltFeatures {
  FeatureTable table;
  std::size_t text_fallbacks = 0;
  /// Vector file used, "hashed" for the fallback or "zeros" when disabled.
  std::string text_source;
};

/// DeepWalk structure columns followed by text columns.
BuiltFeatures build_features(const Dataset& data, const FeatureConfig& config,
                             std::uint64_t seed);

/// Fills input_dim and label_width from the data; explicit values must agree.
RunConfig resolve_config(RunConfig config, const Hypergraph& g, const FeatureTable& features);

/// EvalReport on the given hyperedges; silhouettes use every node and
/// hyperedge embedding with argmax-Q clusters when the model has them.
EvalReport evaluate_split(const Hypergraph& g, const Inference& inference,
                          std::span<const std::size_t> edges);

struct RecoveryScores {
  std::optional<double> node_ari;
  std::optional<double> edge_ari;
  std::size_t node_items = 0;
  std::size_t edge_items = 0;
};

/// ARI of argmax-Q clusters against planted subtypes. Concepts planted as
/// shared (subtype -1) are left out.
RecoveryScores recovery_scores(const Hypergraph& g, const GroundTruth& truth,
                               const Inference& inference);

struct RunOutcome {
  RunConfig config;
  TrainResult training;
  EvalReport test;
  std::optional<RecoveryScores> recovery;
};

/// Trains and writes the run directory:
///   config.txt        resolved configuration
///   run.json          data directory, split visit ids, best epoch
///   metrics.csv       per-epoch losses and validation AUROC
///   best.ckpt final.ckpt
///   report.json slots_test.csv   test EvalReport of the best checkpoint
///   clusters.csv alignment.csv pca2d.csv recovery.json   when clustering ran
RunOutcome run_training(const std::filesystem::path& data_dir, RunConfig config,
                        const std::filesystem::path& out_dir);

/// Reloads best.ckpt and evaluates split "train", "validation" or "test";
/// writes eval_<split>.json.
EvalReport evaluate_run(const std::filesystem::path& rundir, const std::string& split);

struct ReportConcept {
  std::string code;
  std::string description;
  double score = 0.0;
};

struct ReportVisit {
  std::string visit_id;
  double probability = 0.0;
  std::vector<int> labels;
  /// Members ranked by final-layer attention, averaged over heads.
  std::vector<ReportConcept> attended;
};

struct ReportCluster {
  std::size_t cluster = 0;
  std::vector<ReportConcept> concepts;  // node cluster, ranked by Q_V
  std::size_t matched_edge_cluster = 0;
  std::vector<ReportVisit> visits;      // matched hyperedge cluster, ranked by Q_E
  std::optional<double> outcome_rate;   // over labeled visits among the top M
};

struct ClusterReport {
  std::size_t top_concepts = 0;
  std::size_t top_visits = 0;
  std::vector<ReportCluster> clusters;
};

inline constexpr std::size_t kAttendedConcepts = 5;

/// Throws UsageError when the model has no cluster state or K < 2.
ClusterReport export_cluster_report(const Hypergraph& g, const DescriptionMap& descriptions,
                                    const Inference& inference, std::size_t top_concepts,
                                    std::size_t top_visits);
nlohmann::json to_json(const ClusterReport& report);
std::string to_table(const ClusterReport& report);
/// Loads best.ckpt, writes cluster_report.json and cluster_report.txt.
ClusterReport report_run(const std::filesystem::path& rundir, std::size_t top_concepts,
                         std::size_t top_visits);

struct MetricSummary {
  std::string metric;
  std::size_t runs = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for one run
};

std::vector<MetricSummary> aggregate_reports(const std::vector<EvalReport>& reports);
/// Expands a glob of run directories and aggregates their report.json.
std::vector<MetricSummary> aggregate_runs(const std::string& pattern,
                                          std::vector<std::filesystem::path>* matched = nullptr);
std::string format_summary(const std::vector<MetricSummary>& summary);

/// Rows projected onto the two leading principal axes; each axis is signed
/// so its largest-magnitude loading is positive.
Tensor pca_2d(const Tensor& points);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);
/// item_id,domain,cluster,q_1..q_K for nodes then hyperedges.
void write_cluster_csv(const std::filesystem::path& path, const Hypergraph& g,
                       const Inference& inference);
/// item_id,domain,cluster,x,y in one PCA space shared by both domains.
void write_pca_csv(const std::filesystem::path& path, const Hypergraph& g,
                   const Inference& inference);

}  // namespace coclust
