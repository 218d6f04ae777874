#include "coclust/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "coclust/error.hpp"
#include "coclust/ops.hpp"

namespace coclust {

Tensor soft_centroids(const Tensor& points, const Tensor& q) {
  Tape t;
  return t.value(soft_centroids(t, t.constant(points), t.constant(q)));
}

Var soft_centroids(Tape& t, Var points, Var q) {
  const Tensor& X = t.value(points);
  const Tensor& Q = t.value(q);
  if (X.rows() != Q.rows()) throw UsageError("soft_centroids: row counts of X and Q differ");
  const std::size_t n = X.rows(), d = X.cols(), k = Q.cols();
  std::vector<double> mass(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) mass[c] += Q(i, c);
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (!(mass[c] > 0.0)) {
      throw NumericalError("soft_centroids: cluster " + std::to_string(c) + " has no mass");
    }
  }
  Tensor C = Tensor::matrix(k, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      const double w = Q(i, c);
      for (std::size_t j = 0; j < d; ++j) C(c, j) += w * X(i, j);
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < d; ++j) C(c, j) /= mass[c];
  }
  return t.push(std::move(C), {points, q},
                [points, q, n, d, k, mass = std::move(mass)](Tape& t, Var self) {
                  const std::vector<double>& g = t.grad(self);
                  const Tensor& X = t.value(points);
                  const Tensor& Q = t.value(q);
                  const Tensor& C = t.value(self);
                  double* gx = t.needs_grad(points) ? t.grad(points).data() : nullptr;
                  double* gq = t.needs_grad(q) ? t.grad(q).data() : nullptr;
                  for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t c = 0; c < k; ++c) {
                      const double w = Q(i, c) / mass[c];
                      double acc = 0.0;
                      for (std::size_t j = 0; j < d; ++j) {
                        const double gc = g[c * d + j];
                        if (gx) gx[i * d + j] += w * gc;
                        acc += gc * (X(i, j) - C(c, j));
                      }
                      if (gq) gq[i * k + c] += acc / mass[c];
                    }
                  }
                });
}

double neg_cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw UsageError("neg_cosine: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    dot += a[j] * b[j];
    na += a[j] * a[j];
    nb += b[j] * b[j];
  }
  if (na == 0.0 || nb == 0.0) throw NumericalError("neg_cosine: zero vector");
  return -dot / (std::sqrt(na) * std::sqrt(nb));
}

Var neg_cosine_matrix(Tape& t, Var a, Var b) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  if (A.cols() != B.cols()) throw UsageError("neg_cosine_matrix: width mismatch");
  const std::size_t ka = A.rows(), kb = B.rows(), d = A.cols();
  std::vector<double> norm_a(ka), norm_b(kb);
  auto norms = [d](const Tensor& M, std::vector<double>& out) {
    for (std::size_t r = 0; r < M.rows(); ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += M(r, j) * M(r, j);
      if (s == 0.0) throw NumericalError("neg_cosine: zero vector in row " + std::to_string(r));
      out[r] = std::sqrt(s);
    }
  };
  norms(A, norm_a);
  norms(B, norm_b);
  Tensor D = Tensor::matrix(ka, kb);
  for (std::size_t i = 0; i < ka; ++i) {
    for (std::size_t j = 0; j < kb; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += A(i, c) * B(j, c);
      D(i, j) = -dot / (norm_a[i] * norm_b[j]);
    }
  }
  return t.push(std::move(D), {a, b},
                [a, b, ka, kb, d, norm_a = std::move(norm_a), norm_b = std::move(norm_b)](
                    Tape& t, Var self) {
                  const std::vector<double>& g = t.grad(self);
                  const Tensor& A = t.value(a);
                  const Tensor& B = t.value(b);
                  const Tensor& D = t.value(self);
                  double* ga = t.needs_grad(a) ? t.grad(a).data() : nullptr;
                  double* gb = t.needs_grad(b) ? t.grad(b).data() : nullptr;
                  for (std::size_t i = 0; i < ka; ++i) {
                    for (std::size_t j = 0; j < kb; ++j) {
                      // D = -cos; d cos / d a = b / (|a||b|) - cos a / |a|^2.
                      const double gd = -g[i * kb + j];
                      const double cosv = -D(i, j);
                      const double inv = 1.0 / (norm_a[i] * norm_b[j]);
                      for (std::size_t c = 0; c < d; ++c) {
                        if (ga) {
                          ga[i * d + c] +=
                              gd * (B(j, c) * inv - cosv * A(i, c) / (norm_a[i] * norm_a[i]));
                        }
                        if (gb) {
                          gb[j * d + c] +=
                              gd * (A(i, c) * inv - cosv * B(j, c) / (norm_b[j] * norm_b[j]));
                        }
                      }
                    }
                  }
                });
}

std::vector<std::size_t> align_positive(const Tensor& distances) {
  std::vector<std::size_t> out(distances.rows(), 0);
  for (std::size_t i = 0; i < distances.rows(); ++i) {
    for (std::size_t j = 1; j < distances.cols(); ++j) {
      if (distances(i, j) < distances(i, out[i])) out[i] = j;
    }
  }
  return out;
}

std::vector<std::size_t> align_positive(const Tensor& z_nodes, const Tensor& z_edges) {
  Tape t;
  return align_positive(t.value(neg_cosine_matrix(t, t.constant(z_nodes), t.constant(z_edges))));
}

Var triplet_from_distances(Tape& t, Var distances, double margin) {
  const Tensor& D = t.value(distances);
  const std::size_t k = D.rows();
  if (k < 2 || D.cols() != k) {
    throw UsageError("triplet_align_loss: need a square distance matrix with K >= 2");
  }
  if (!(margin > 0.0)) throw UsageError("triplet_align_loss: margin must be positive");
  const std::vector<std::size_t> positive = align_positive(D);
  const double inv_count = 1.0 / static_cast<double>(k * (k - 1));
  double total = 0.0;
  std::vector<std::uint8_t> active(k * k, 0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t n = 0; n < k; ++n) {
      if (n == positive[i]) continue;
      const double term = D(i, positive[i]) - D(i, n) + margin;
      if (term > 0.0) {
        total += term;
        active[i * k + n] = 1;
      }
    }
  }
  return t.push(Tensor::scalar(total * inv_count), {distances},
                [distances, k, inv_count, positive, active = std::move(active)](Tape& t,
                                                                                 Var self) {
                  const double g = t.grad(self)[0] * inv_count;
                  std::vector<double>& gd = t.grad(distances);
                  for (std::size_t i = 0; i < k; ++i) {
                    for (std::size_t n = 0; n < k; ++n) {
                      if (!active[i * k + n]) continue;
                      gd[i * k + positive[i]] += g;
                      gd[i * k + n] -= g;
                    }
                  }
                });
}

Var triplet_align_loss(Tape& t, Var z_nodes, Var z_edges, double margin) {
  return triplet_from_distances(t, neg_cosine_matrix(t, z_nodes, z_edges), margin);
}

double triplet_align_loss(const Tensor& z_nodes, const Tensor& z_edges, double margin) {
  Tape t;
  return t.value(triplet_align_loss(t, t.constant(z_nodes), t.constant(z_edges), margin))[0];
}

ProjectionHead ProjectionHead::init(std::size_t in_dim, std::size_t out_dim, std::mt19937_64& rng) {
  auto xavier = [&rng](std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Tensor w = Tensor::matrix(fan_in, fan_out);
    for (double& x : w.storage()) x = dist(rng);
    return w;
  };
  ProjectionHead h;
  h.w1 = xavier(in_dim, in_dim);
  h.b1 = Tensor::matrix(1, in_dim, 0.0);
  h.norm_gain = Tensor::matrix(1, in_dim, 1.0);
  h.norm_bias = Tensor::matrix(1, in_dim, 0.0);
  h.w2 = xavier(in_dim, out_dim);
  h.b2 = Tensor::matrix(1, out_dim, 0.0);
  h.running_mean = Tensor::matrix(1, in_dim, 0.0);
  h.running_var = Tensor::matrix(1, in_dim, 1.0);
  for (NamedTensor& p : h.named_parameters("")) p.tensor->set_requires_grad(true);
  return h;
}

std::vector<NamedTensor> ProjectionHead::named_parameters(const std::string& prefix) {
  return {{prefix + ".w1", &w1},       {prefix + ".b1", &b1},
          {prefix + ".norm_gain", &norm_gain}, {prefix + ".norm_bias", &norm_bias},
          {prefix + ".w2", &w2},       {prefix + ".b2", &b2}};
}

std::vector<NamedTensor> ProjectionHead::named_buffers(const std::string& prefix) {
  return {{prefix + ".running_mean", &running_mean}, {prefix + ".running_var", &running_var}};
}

Var batch_norm(Tape& t, Var x, Var gain, Var bias, Tensor& running_mean, Tensor& running_var,
               bool training, double momentum, double eps) {
  const Tensor& X = t.value(x);
  const Tensor& G = t.value(gain);
  const Tensor& B = t.value(bias);
  const std::size_t n = X.rows(), d = X.cols();
  if (G.size() != d || B.size() != d || running_mean.size() != d || running_var.size() != d) {
    throw UsageError("batch_norm: parameter width mismatch");
  }
  std::vector<double> mu(d, 0.0), inv_std(d), xhat(n * d);
  if (training) {
    if (n < 2) throw UsageError("batch_norm: training mode needs at least two rows");
    std::vector<double> var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) mu[j] += X(i, j);
    }
    for (double& m : mu) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) var[j] += (X(i, j) - mu[j]) * (X(i, j) - mu[j]);
    }
    for (std::size_t j = 0; j < d; ++j) {
      const double population = var[j] / static_cast<double>(n);
      inv_std[j] = 1.0 / std::sqrt(population + eps);
      const double unbiased = var[j] / static_cast<double>(n - 1);
      running_mean[j] = (1.0 - momentum) * running_mean[j] + momentum * mu[j];
      running_var[j] = (1.0 - momentum) * running_var[j] + momentum * unbiased;
    }
  } else {
    for (std::size_t j = 0; j < d; ++j) {
      mu[j] = running_mean[j];
      inv_std[j] = 1.0 / std::sqrt(running_var[j] + eps);
    }
  }
  Tensor Y = Tensor::matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      xhat[i * d + j] = (X(i, j) - mu[j]) * inv_std[j];
      Y(i, j) = G[j] * xhat[i * d + j] + B[j];
    }
  }
  return t.push(std::move(Y), {x, gain, bias},
                [x, gain, bias, n, d, training, inv_std = std::move(inv_std),
                 xhat = std::move(xhat)](Tape& t, Var self) {
                  const std::vector<double>& g = t.grad(self);
                  const Tensor& G = t.value(gain);
                  if (t.needs_grad(gain)) {
                    std::vector<double>& gg = t.grad(gain);
                    for (std::size_t i = 0; i < n; ++i) {
                      for (std::size_t j = 0; j < d; ++j) gg[j] += g[i * d + j] * xhat[i * d + j];
                    }
                  }
                  if (t.needs_grad(bias)) {
                    std::vector<double>& gb = t.grad(bias);
                    for (std::size_t i = 0; i < n; ++i) {
                      for (std::size_t j = 0; j < d; ++j) gb[j] += g[i * d + j];
                    }
                  }
                  if (!t.needs_grad(x)) return;
                  std::vector<double>& gx = t.grad(x);
                  if (!training) {
                    for (std::size_t i = 0; i < n; ++i) {
                      for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[i * d + j] * G[j] * inv_std[j];
                    }
                    return;
                  }
                  const double inv_n = 1.0 / static_cast<double>(n);
                  for (std::size_t j = 0; j < d; ++j) {
                    double mean_d = 0.0, mean_dx = 0.0;
                    for (std::size_t i = 0; i < n; ++i) {
                      const double dh = g[i * d + j] * G[j];
                      mean_d += dh;
                      mean_dx += dh * xhat[i * d + j];
                    }
                    mean_d *= inv_n;
                    mean_dx *= inv_n;
                    for (std::size_t i = 0; i < n; ++i) {
                      const double dh = g[i * d + j] * G[j];
                      gx[i * d + j] += inv_std[j] * (dh - mean_d - xhat[i * d + j] * mean_dx);
                    }
                  }
                });
}

Var project(Tape& t, ProjectionHead& head, Var centroids, bool training) {
  Var h = ops::add_bias(t, ops::matmul(t, centroids, t.parameter(head.w1)), t.parameter(head.b1));
  h = batch_norm(t, h, t.parameter(head.norm_gain), t.parameter(head.norm_bias),
                 head.running_mean, head.running_var, training, head.momentum, head.eps);
  h = ops::relu(t, h);
  return ops::add_bias(t, ops::matmul(t, h, t.parameter(head.w2)), t.parameter(head.b2));
}

std::vector<AlignmentRow> alignment_report(const Tensor& z_nodes, const Tensor& z_edges) {
  Tape t;
  const Tensor& D =
      t.value(neg_cosine_matrix(t, t.constant(z_nodes), t.constant(z_edges)));
  const std::vector<std::size_t> positive = align_positive(D);
  std::vector<AlignmentRow> rows;
  for (std::size_t i = 0; i < D.rows(); ++i) {
    AlignmentRow r;
    r.anchor = i;
    r.matched = positive[i];
    r.distance = D(i, positive[i]);
    for (std::size_t n = 0; n < D.cols(); ++n) {
      if (n != positive[i]) r.margins.emplace_back(n, D(i, n) - r.distance);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_alignment_csv(const std::filesystem::path& path, const std::vector<AlignmentRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "anchor_cluster,matched_cluster,distance,negative_margins\n";
  out << std::setprecision(17);
  for (const AlignmentRow& r : rows) {
    out << r.anchor << ',' << r.matched << ',' << r.distance << ',';
    for (std::size_t i = 0; i < r.margins.size(); ++i) {
      if (i) out << ';';
      out << r.margins[i].first << ':' << r.margins[i].second;
    }
    out << '\n';
  }
}

}  // namespace coclust
