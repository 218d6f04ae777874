#include "coclust/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "coclust/error.hpp"
#include "coclust/hypergraph.hpp"

namespace coclust {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

void check_widths(const Tensor& points, const Tensor& centroids, const char* op) {
  if (points.cols() != centroids.cols()) {
    throw UsageError(std::string(op) + ": point width " + std::to_string(points.cols()) +
                     " differs from centroid width " + std::to_string(centroids.cols()));
  }
}

}  // namespace

std::string to_string(Domain d) { return d == Domain::node ? "node" : "hyperedge"; }

KMeansResult kmeans(const Tensor& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations, double tol) {
  const std::size_t n = points.rows(), d = points.cols();
  if (k < 1) throw UsageError("kmeans: k must be positive");
  std::set<std::vector<double>> distinct;
  for (std::size_t i = 0; i < n && distinct.size() < k; ++i) {
    distinct.emplace(points.row(i).begin(), points.row(i).end());
  }
  if (distinct.size() < k) {
    throw DataError("kmeans: " + std::to_string(distinct.size()) + " distinct points for k = " +
                    std::to_string(k));
  }

  std::mt19937_64 rng(seed);
  KMeansResult result;
  result.centroids = Tensor::matrix(k, d);
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::size_t pick = first(rng);
  std::copy(points.row(pick).begin(), points.row(pick).end(), result.centroids.row(0).begin());
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points.row(i), result.centroids.row(c - 1)));
      total += nearest[i];
    }
    std::uniform_real_distribution<double> u(0.0, total);
    const double r = u(rng);
    double acc = 0.0;
    pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (nearest[i] <= 0.0) continue;
      acc += nearest[i];
      pick = i;
      if (r < acc) break;
    }
    std::copy(points.row(pick).begin(), points.row(pick).end(), result.centroids.row(c).begin());
  }

  result.labels.assign(n, 0);
  Tensor sums = Tensor::matrix(k, d);
  std::vector<std::size_t> counts(k);
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    result.iterations = iter + 1;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dist = squared_distance(points.row(i), result.centroids.row(c));
        if (dist < best) {
          best = dist;
          result.labels[i] = c;
        }
      }
    }
    std::fill(sums.storage().begin(), sums.storage().end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[result.labels[i]];
      for (std::size_t j = 0; j < d; ++j) sums(result.labels[i], j) += points(i, j);
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      double moved = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double next = sums(c, j) / static_cast<double>(counts[c]);
        moved += (next - result.centroids(c, j)) * (next - result.centroids(c, j));
        result.centroids(c, j) = next;
      }
      shift = std::max(shift, std::sqrt(moved));
    }
    if (shift < tol) break;
  }
  result.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const double dist = squared_distance(points.row(i), result.centroids.row(c));
      if (dist < best) {
        best = dist;
        result.labels[i] = c;
      }
    }
    result.inertia += best;
  }
  return result;
}

KMeansResult kmeans_restarts(const Tensor& points, std::size_t k, std::uint64_t seed,
                             std::size_t restarts) {
  if (restarts < 1) throw UsageError("kmeans: restarts must be positive");
  KMeansResult best = kmeans(points, k, seed);
  for (std::size_t r = 1; r < restarts; ++r) {
    KMeansResult next = kmeans(points, k, mix_seed(seed, r));
    if (next.inertia < best.inertia) best = std::move(next);
  }
  return best;
}

Tensor kmeans_init(const Tensor& points, std::size_t k, std::uint64_t seed,
                   std::size_t restarts) {
  return kmeans_restarts(points, k, seed, restarts).centroids;
}

std::vector<double> soft_assign(std::span<const double> x, const Tensor& centroids) {
  if (x.size() != centroids.cols()) throw UsageError("soft_assign: width mismatch");
  std::vector<double> q(centroids.rows());
  double total = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    q[k] = 1.0 / (1.0 + squared_distance(x, centroids.row(k)));
    total += q[k];
  }
  for (double& v : q) v /= total;
  return q;
}

Tensor soft_assign(const Tensor& points, const Tensor& centroids) {
  Tape t;
  return t.value(soft_assign(t, t.constant(points), t.constant(centroids)));
}

Var soft_assign(Tape& t, Var points, Var centroids) {
  const Tensor& X = t.value(points);
  const Tensor& U = t.value(centroids);
  check_widths(X, U, "soft_assign");
  const std::size_t n = X.rows(), k = U.rows(), d = X.cols();
  Tensor Q = Tensor::matrix(n, k);
  std::vector<double> kernel(n * k), norm(n);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      kernel[i * k + c] = 1.0 / (1.0 + squared_distance(X.row(i), U.row(c)));
      total += kernel[i * k + c];
    }
    norm[i] = total;
    for (std::size_t c = 0; c < k; ++c) Q(i, c) = kernel[i * k + c] / total;
  }
  return t.push(std::move(Q), {points, centroids},
                [points, centroids, n, k, d, kernel = std::move(kernel), norm = std::move(norm)](
                    Tape& t, Var self) {
                  const std::vector<double>& g = t.grad(self);
                  const Tensor& Q = t.value(self);
                  const Tensor& X = t.value(points);
                  const Tensor& U = t.value(centroids);
                  double* gx = t.needs_grad(points) ? t.grad(points).data() : nullptr;
                  double* gu = t.needs_grad(centroids) ? t.grad(centroids).data() : nullptr;
                  for (std::size_t i = 0; i < n; ++i) {
                    double gq = 0.0;
                    for (std::size_t c = 0; c < k; ++c) gq += g[i * k + c] * Q(i, c);
                    for (std::size_t c = 0; c < k; ++c) {
                      const double dw = (g[i * k + c] - gq) / norm[i];
                      const double w = kernel[i * k + c];
                      // w = 1 / (1 + r), dw/dr = -w^2, dr/dx = 2 (x - u).
                      const double coef = -dw * w * w * 2.0;
                      for (std::size_t j = 0; j < d; ++j) {
                        const double diff = X(i, j) - U(c, j);
                        if (gx) gx[i * d + j] += coef * diff;
                        if (gu) gu[c * d + j] -= coef * diff;
                      }
                    }
                  }
                });
}

Tensor target_distribution(const Tensor& q) {
  const std::size_t n = q.rows(), k = q.cols();
  std::vector<double> f(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) f[c] += q(i, c);
  }
  Tensor p = Tensor::matrix(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      p(i, c) = f[c] > 0.0 ? q(i, c) * q(i, c) / f[c] : 0.0;
      total += p(i, c);
    }
    if (!(total > 0.0)) {
      throw NumericalError("target_distribution: row " + std::to_string(i) +
                           " has a zero normalizer");
    }
    for (std::size_t c = 0; c < k; ++c) p(i, c) /= total;
  }
  return p;
}

double kl_cluster_loss(const Tensor& p, const Tensor& q, KlReduction reduction) {
  Tape t;
  return t.value(kl_cluster_loss(t, p, t.constant(q), reduction))[0];
}

Var kl_cluster_loss(Tape& t, const Tensor& p, Var q, KlReduction reduction) {
  const Tensor& Q = t.value(q);
  if (!p.same_shape(Q)) {
    throw UsageError("kl_cluster_loss: P " + p.shape_string() + " vs Q " + Q.shape_string());
  }
  const double scale =
      reduction == KlReduction::batch_mean ? 1.0 / static_cast<double>(Q.rows()) : 1.0;
  // Each term p log(p/q) - p + q is non-negative; with rows of P and Q summing
  // to one the extra -p + q cancels, so the sum is KL(P||Q) without the
  // rounding that can push the plain form slightly below zero.
  double total = 0.0;
  for (std::size_t i = 0; i < Q.size(); ++i) {
    const double term = p[i] > 0.0 ? p[i] * std::log(p[i] / Q[i]) - p[i] + Q[i] : Q[i];
    total += std::max(term, 0.0);
  }
  return t.push(Tensor::scalar(total * scale), {q}, [q, p, scale](Tape& t, Var self) {
    const double g = t.grad(self)[0] * scale;
    const Tensor& Q = t.value(q);
    std::vector<double>& gq = t.grad(q);
    for (std::size_t i = 0; i < Q.size(); ++i) {
      gq[i] += g * (1.0 - (p[i] > 0.0 ? p[i] / Q[i] : 0.0));
    }
  });
}

std::vector<std::size_t> hard_assignments(const Tensor& q) {
  std::vector<std::size_t> out(q.rows(), 0);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    for (std::size_t c = 1; c < q.cols(); ++c) {
      if (q(i, c) > q(i, out[i])) out[i] = c;
    }
  }
  return out;
}

}  // namespace coclust
