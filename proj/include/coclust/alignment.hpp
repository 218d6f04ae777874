#pragma once

#include <cstddef>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "coclust/tape.hpp"
#include "coclust/tensor.hpp"

namespace coclust {

/// c^k = sum_i q_ik x_i / sum_i q_ik. Throws NumericalError naming k when a
/// column of Q sums to zero.
Tensor soft_centroids(const Tensor& points, const Tensor& q);
Var soft_centroids(Tape& t, Var points, Var q);

/// -(a . b) / (|a| |b|). Throws NumericalError for a zero vector.
double neg_cosine(std::span<const double> a, std::span<const double> b);
/// D[i][j] = neg_cosine(a_i, b_j).
Var neg_cosine_matrix(Tape& t, Var a, Var b);

/// For every row i of the distance matrix, the column with the smallest
/// distance (lowest index on ties).
std::vector<std::size_t> align_positive(const Tensor& distances);
std::vector<std::size_t> align_positive(const Tensor& z_nodes, const Tensor& z_edges);

/// Mean over the K(K-1) (anchor, negative) pairs of
/// max(0, D(anchor, positive) - D(anchor, negative) + margin), anchors being
/// the rows of z_nodes and positives chosen by align_positive.
double triplet_align_loss(const Tensor& z_nodes, const Tensor& z_edges, double margin);
Var triplet_align_loss(Tape& t, Var z_nodes, Var z_edges, double margin);
/// Same loss from a precomputed distance matrix.
Var triplet_from_distances(Tape& t, Var distances, double margin);

/// Linear -> batch norm -> ReLU -> linear.
struct ProjectionHead {
  Tensor w1, b1, norm_gain, norm_bias, w2, b2;
  Tensor running_mean, running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  static ProjectionHead init(std::size_t in_dim, std::size_t out_dim, std::mt19937_64& rng);
  std::vector<NamedTensor> named_parameters(const std::string& prefix);
  /// Running statistics; stored in checkpoints but not optimized.
  std::vector<NamedTensor> named_buffers(const std::string& prefix);
};

/// Batch normalization over rows. Training mode normalizes with the batch
/// statistics (population variance) and updates the running statistics with
/// the unbiased variance; evaluation mode uses the running statistics.
Var batch_norm(Tape& t, Var x, Var gain, Var bias, Tensor& running_mean, Tensor& running_var,
               bool training, double momentum, double eps);

Var project(Tape& t, ProjectionHead& head, Var centroids, bool training);

struct AlignmentRow {
  std::size_t anchor = 0;
  std::size_t matched = 0;
  double distance = 0.0;
  /// D(anchor, n) - D(anchor, matched) for every n != matched.
  std::vector<std::pair<std::size_t, double>> margins;
};

std::vector<AlignmentRow> alignment_report(const Tensor& z_nodes, const Tensor& z_edges);
/// CSV: anchor_cluster,matched_cluster,distance,negative_margins
/// where negative_margins is "k:margin" joined by ';'.
void write_alignment_csv(const std::filesystem::path& path, const std::vector<AlignmentRow>& rows);

}  // namespace coclust
