#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "coclust/alignment.hpp"
#include "coclust/clustering.hpp"
#include "coclust/hypergraph.hpp"
#include "coclust/tensor.hpp"
#include "coclust/transformer.hpp"

namespace coclust {

struct TrainConfig {
  double alpha = 10.0;
  double beta = 0.1;
  std::size_t clusters = 5;
  double margin = 1.0;
  double learning_rate = 1e-3;
  std::size_t epochs = 200;
  std::size_t warmup_epochs = 100;
  std::uint64_t seed = 1;
  std::array<double, 3> split{0.7, 0.1, 0.2};
  /// Labeled training hyperedges per step; 0 means the whole split. With
  /// batches, the hyperedge clustering loss only sees the batch rows.
  std::size_t batch_size = 0;
  /// 1-based layer whose embeddings feed clustering; 0 means the last.
  std::size_t cluster_layer = 0;
  std::size_t projection_dim = 48;
  /// false trains the backbone alone, skipping k-means and both cluster
  /// losses.
  bool clustering = true;

  void validate() const;
};

struct SplitIndex {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
};

/// cls + alpha (node_kl + edge_kl) + beta align.
double total_loss(double cls, double node_kl, double edge_kl, double align, double alpha,
                  double beta);

/// Seeded uniform permutation cut into contiguous slices. Sizes follow the
/// largest-remainder rounding of the fractions. Throws DataError with fewer
/// than three items.
SplitIndex split_items(std::vector<std::size_t> items, const std::array<double, 3>& fractions,
                       std::uint64_t seed);
/// split_items over the labeled hyperedges of g.
SplitIndex split_dataset(const Hypergraph& g, const std::array<double, 3>& fractions,
                         std::uint64_t seed);

/// Backbone plus the clustering and alignment parameters.
struct CoClusterModel {
  ModelState backbone;
  std::size_t clusters = 0;
  Tensor node_centroids;
  Tensor edge_centroids;
  ProjectionHead node_projection;
  ProjectionHead edge_projection;
  bool clusters_ready = false;

  static CoClusterModel init(const TransformerConfig& model, const TrainConfig& train);
  std::vector<NamedTensor> cluster_parameters();
  /// Backbone parameters followed by cluster_parameters().
  std::vector<NamedTensor> named_parameters();
  std::vector<NamedTensor> named_buffers();
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  int phase = 1;
  double total = 0.0;
  double cls = 0.0;
  double node_kl = 0.0;
  double edge_kl = 0.0;
  double align = 0.0;
  /// KL values of the first step after the target refresh.
  double node_kl_at_refresh = 0.0;
  double edge_kl_at_refresh = 0.0;
  std::optional<double> val_auroc;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  SplitIndex split;
  CoClusterModel best;
  std::size_t best_epoch = 0;
  CoClusterModel last;
};

TrainResult train(const Hypergraph& g, const Tensor& features, CoClusterModel model,
                  const TrainConfig& config, const SplitIndex& split);
TrainResult train(const Hypergraph& g, const Tensor& features, CoClusterModel model,
                  const TrainConfig& config);

/// Deterministic evaluation-mode outputs of a model.
struct Inference {
  Tensor probs;            // |E| x label_width
  Tensor node_embeddings;  // X at the clustering layer
  Tensor edge_embeddings;  // E at the clustering layer
  std::optional<ClusterState> nodes;
  std::optional<ClusterState> edges;
  Tensor node_projection;  // K x projection_dim, when clusters are ready
  Tensor edge_projection;
  /// Final-layer node-to-hyperedge weights, [incidence][head].
  std::vector<double> edge_attention;
};

Inference infer(CoClusterModel& model, const Hypergraph& g, const Tensor& features,
                std::size_t cluster_layer = 0);

/// Labels of the given hyperedges as a rows x label_width tensor.
Tensor label_matrix(const Hypergraph& g, std::span<const std::size_t> edges);
/// Mean per-slot AUROC of probs restricted to edges; absent when no slot has
/// both classes.
std::optional<double> mean_auroc(const Tensor& probs, const Hypergraph& g,
                                 std::span<const std::size_t> edges);

/// Phase-2 epochs e for which a KL series at e + window exceeds its value at e.
std::size_t kl_trend_violations(const std::vector<EpochRecord>& history, std::size_t window = 5);

}  // namespace coclust
