#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coclust/tape.hpp"
#include "coclust/tensor.hpp"

namespace coclust {

enum class Domain { node, hyperedge };
std::string to_string(Domain d);

/// Soft clustering of one domain. centroids is K x d and trainable; Q and P
/// are items x K with probability rows.
struct ClusterState {
  Domain domain = Domain::node;
  std::size_t clusters = 0;
  Tensor centroids;
  Tensor assignments;  // Q
  Tensor target;       // P
  std::optional<std::size_t> last_target_refresh;
};

struct KMeansResult {
  Tensor centroids;
  std::vector<std::size_t> labels;
  double inertia = 0.0;
  std::size_t iterations = 0;
};

/// k-means++ seeding followed by Lloyd iterations until every centroid moves
/// less than tol or max_iterations is reached. Empty clusters keep their
/// previous centroid. Throws DataError with fewer than k distinct points.
KMeansResult kmeans(const Tensor& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations = 100, double tol = 1e-6);
/// Best of `restarts` seeded kmeans runs by inertia (earliest on ties).
KMeansResult kmeans_restarts(const Tensor& points, std::size_t k, std::uint64_t seed,
                             std::size_t restarts);
inline constexpr std::size_t kDefaultRestarts = 10;
/// Centroids of kmeans_restarts.
Tensor kmeans_init(const Tensor& points, std::size_t k, std::uint64_t seed,
                   std::size_t restarts = kDefaultRestarts);

/// Student-t kernel (1 + |x - u_k|^2)^-1, normalized over k.
std::vector<double> soft_assign(std::span<const double> x, const Tensor& centroids);
Tensor soft_assign(const Tensor& points, const Tensor& centroids);
Var soft_assign(Tape& t, Var points, Var centroids);

/// p_ik proportional to q_ik^2 / f_k with f_k = sum_i q_ik. Clusters with
/// f_k = 0 contribute nothing; a row whose normalizer vanishes throws
/// NumericalError.
Tensor target_distribution(const Tensor& q);

enum class KlReduction {
  sum,         // sum over items and clusters
  batch_mean,  // the sum divided by the item count
};

/// KL(P || Q) with 0 log 0 = 0. P is a constant target.
double kl_cluster_loss(const Tensor& p, const Tensor& q, KlReduction reduction = KlReduction::sum);
Var kl_cluster_loss(Tape& t, const Tensor& p, Var q, KlReduction reduction = KlReduction::sum);

/// argmax per row, lowest index on ties.
std::vector<std::size_t> hard_assignments(const Tensor& q);

}  // namespace coclust
