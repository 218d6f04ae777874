#include "coclust/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "coclust/error.hpp"

namespace coclust::ops {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw UsageError(what);
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  require(a.same_shape(b), std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                               b.shape_string());
}

}  // namespace

std::vector<double> softmax(std::span<const double> v) {
  std::vector<double> out(v.size());
  if (v.empty()) return out;
  double hi = v[0];
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericalError("softmax: non-finite input");
    hi = std::max(hi, x);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - hi);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

std::vector<double> layer_norm(std::span<const double> v, std::span<const double> gain,
                               std::span<const double> bias, double eps) {
  require(gain.size() == v.size() && bias.size() == v.size(),
          "layer_norm: gain/bias length must match input length");
  require(eps > 0.0, "layer_norm: eps must be positive");
  const double n = static_cast<double>(v.size());
  double mu = 0.0;
  for (double x : v) mu += x;
  mu /= n;
  double var = 0.0;
  for (double x : v) var += (x - mu) * (x - mu);
  var /= n;
  const double inv = 1.0 / std::sqrt(var + eps);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = gain[i] * (v[i] - mu) * inv + bias[i];
  return out;
}

Var matmul(Tape& t, Var a, Var b) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  require(A.cols() == B.rows(), "matmul: inner dimensions " + A.shape_string() + " x " +
                                    B.shape_string());
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  Tensor C = Tensor::matrix(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double* c = &C(i, 0);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A(i, p);
      const double* brow = B.data().data() + p * m;
      for (std::size_t j = 0; j < m; ++j) c[j] += av * brow[j];
    }
  }
  return t.push(std::move(C), {a, b}, [a, b, n, k, m](Tape& t, Var self) {
    const std::vector<double>& g = t.grad(self);
    const Tensor& A = t.value(a);
    const Tensor& B = t.value(b);
    if (t.needs_grad(a)) {
      std::vector<double>& ga = t.grad(a);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = B.data().data() + p * m;
          const double* grow = g.data() + i * m;
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (t.needs_grad(b)) {
      std::vector<double>& gb = t.grad(b);
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = g.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const double av = A(i, p);
          double* gbrow = gb.data() + p * m;
          for (std::size_t j = 0; j < m; ++j) gbrow[j] += av * grow[j];
        }
      }
    }
  });
}

Var add(Tape& t, Var a, Var b) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  require_same(A, B, "add");
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] += B[i];
  return t.push(std::move(C), {a, b}, [a, b](Tape& t, Var self) {
    const std::vector<double>& g = t.grad(self);
    for (Var p : {a, b}) {
      if (!t.needs_grad(p)) continue;
      std::vector<double>& gp = t.grad(p);
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
    }
  });
}

Var scale(Tape& t, Var a, double factor) {
  Tensor C = t.value(a);
  for (double& x : C.storage()) x *= factor;
  return t.push(std::move(C), {a}, [a, factor](Tape& t, Var self) {
    const std::vector<double>& g = t.grad(self);
    std::vector<double>& ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  });
}

Var add_bias(Tape& t, Var x, Var bias) {
  const Tensor& X = t.value(x);
  const Tensor& b = t.value(bias);
  require(b.size() == X.cols(), "add_bias: bias width " + b.shape_string() + " vs input " +
                                    X.shape_string());
  Tensor Y = X;
  const std::size_t n = X.rows(), m = X.cols();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) Y(i, j) += b[j];
  }
  return t.push(std::move(Y), {x, bias}, [x, bias, n, m](Tape& t, Var self) {
    const std::vector<double>& g = t.grad(self);
    if (t.needs_grad(x)) {
      std::vector<double>& gx = t.grad(x);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (t.needs_grad(bias)) {
      std::vector<double>& gb = t.grad(bias);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) gb[j] += g[i * m + j];
      }
    }
  });
}

Var relu(Tape& t, Var x) {
  Tensor Y = t.value(x);
  for (double& v : Y.storage()) v = v > 0.0 ? v : 0.0;
  return t.push(std::move(Y), {x}, [x](Tape& t, Var self) {
    const std::vector<double>& g = t.grad(self);
    const Tensor& X = t.value(x);
    std::vector<double>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (X[i] > 0.0) gx[i] += g[i];
    }
  });
}

Var sigmoid(Tape& t, Var x) {
  Tensor Y = t.value(x);
  for (double& v : Y.storage()) {
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return t.push(std::move(Y), {x}, [x](Tape& t, Var self) {
    const std::vector<double>& g = t.grad(self);
    const Tensor& Y = t.value(self);
    std::vector<double>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * Y[i] * (1.0 - Y[i]);
  });
}

Var softmax_rows(Tape& t, Var x) {
  const Tensor& X = t.value(x);
  Tensor Y = Tensor::matrix(X.rows(), X.cols());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    std::vector<double> row = softmax(X.row(r));
    std::copy(row.begin(), row.end(), Y.row(r).begin());
  }
  return t.push(std::move(Y), {x}, [x](Tape& t, Var self) {
    const std::vector<double>& g = t.grad(self);
    const Tensor& Y = t.value(self);
    std::vector<double>& gx = t.grad(x);
    const std::size_t m = Y.cols();
    for (std::size_t r = 0; r < Y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < m; ++j) dot += g[r * m + j] * Y(r, j);
      for (std::size_t j = 0; j < m; ++j) gx[r * m + j] += Y(r, j) * (g[r * m + j] - dot);
    }
  });
}

Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps) {
  const Tensor& X = t.value(x);
  const Tensor& G = t.value(gain);
  const Tensor& B = t.value(bias);
  const std::size_t n = X.rows(), m = X.cols();
  require(G.size() == m && B.size() == m, "layer_norm: gain/bias width must match input width");
  require(eps > 0.0, "layer_norm: eps must be positive");
  Tensor Y = Tensor::matrix(n, m);
  // Normalized input and inverse std per row, kept for backward.
  std::vector<double> xhat(n * m), inv_std(n);
  for (std::size_t r = 0; r < n; ++r) {
    double mu = 0.0;
    for (std::size_t j = 0; j < m; ++j) mu += X(r, j);
    mu /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t j = 0; j < m; ++j) var += (X(r, j) - mu) * (X(r, j) - mu);
    var /= static_cast<double>(m);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < m; ++j) {
      xhat[r * m + j] = (X(r, j) - mu) * inv_std[r];
      Y(r, j) = G[j] * xhat[r * m + j] + B[j];
    }
  }
  return t.push(std::move(Y), {x, gain, bias},
                [x, gain, bias, n, m, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                    Tape& t, Var self) {
                  const std::vector<double>& g = t.grad(self);
                  const Tensor& G = t.value(gain);
                  if (t.needs_grad(gain)) {
                    std::vector<double>& gg = t.grad(gain);
                    for (std::size_t r = 0; r < n; ++r) {
                      for (std::size_t j = 0; j < m; ++j) gg[j] += g[r * m + j] * xhat[r * m + j];
                    }
                  }
                  if (t.needs_grad(bias)) {
                    std::vector<double>& gb = t.grad(bias);
                    for (std::size_t r = 0; r < n; ++r) {
                      for (std::size_t j = 0; j < m; ++j) gb[j] += g[r * m + j];
                    }
                  }
                  if (t.needs_grad(x)) {
                    std::vector<double>& gx = t.grad(x);
                    const double inv_m = 1.0 / static_cast<double>(m);
                    for (std::size_t r = 0; r < n; ++r) {
                      double mean_d = 0.0, mean_dx = 0.0;
                      for (std::size_t j = 0; j < m; ++j) {
                        const double d = g[r * m + j] * G[j];
                        mean_d += d;
                        mean_dx += d * xhat[r * m + j];
                      }
                      mean_d *= inv_m;
                      mean_dx *= inv_m;
                      for (std::size_t j = 0; j < m; ++j) {
                        const double d = g[r * m + j] * G[j];
                        gx[r * m + j] += inv_std[r] * (d - mean_d - xhat[r * m + j] * mean_dx);
                      }
                    }
                  }
                });
}

Var concat_cols(Tape& t, std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const std::size_t n = t.value(parts[0]).rows();
  std::size_t width = 0;
  for (Var p : parts) {
    require(t.value(p).rows() == n, "concat_cols: row count mismatch");
    width += t.value(p).cols();
  }
  Tensor Y = Tensor::matrix(n, width);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& P = t.value(p);
    for (std::size_t r = 0; r < n; ++r) {
      std::copy(P.row(r).begin(), P.row(r).end(), Y.row(r).begin() + offset);
    }
    offset += P.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.push(std::move(Y), inputs, [inputs, n, width](Tape& t, Var self) {
    const std::vector<double>& g = t.grad(self);
    std::size_t offset = 0;
    for (Var p : inputs) {
      const std::size_t w = t.value(p).cols();
      if (t.needs_grad(p)) {
        std::vector<double>& gp = t.grad(p);
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t j = 0; j < w; ++j) gp[r * w + j] += g[r * width + offset + j];
        }
      }
      offset += w;
    }
  });
}

Var gather_rows(Tape& t, Var x, std::span<const std::size_t> rows) {
  const Tensor& X = t.value(x);
  require(!rows.empty(), "gather_rows: empty row list");
  const std::size_t m = X.cols();
  Tensor Y = Tensor::matrix(rows.size(), m);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] < X.rows(), "gather_rows: row index out of range");
    std::copy(X.row(rows[i]).begin(), X.row(rows[i]).end(), Y.row(i).begin());
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return t.push(std::move(Y), {x}, [x, m, idx = std::move(idx)](Tape& t, Var self) {
    const std::vector<double>& g = t.grad(self);
    std::vector<double>& gx = t.grad(x);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < m; ++j) gx[idx[i] * m + j] += g[i * m + j];
    }
  });
}

Var segment_mean(Tape& t, Var x, const Segments& segments) {
  const Tensor& X = t.value(x);
  const std::size_t m = X.cols();
  Tensor Y = Tensor::matrix(segments.count(), m);
  for (std::size_t s = 0; s < segments.count(); ++s) {
    auto members = segments.members(s);
    if (members.empty()) continue;
    const double w = 1.0 / static_cast<double>(members.size());
    for (std::size_t u : members) {
      require(u < X.rows(), "segment_mean: member index out of range");
      for (std::size_t j = 0; j < m; ++j) Y(s, j) += w * X(u, j);
    }
  }
  return t.push(std::move(Y), {x}, [x, m, segments](Tape& t, Var self) {
    const std::vector<double>& g = t.grad(self);
    std::vector<double>& gx = t.grad(x);
    for (std::size_t s = 0; s < segments.count(); ++s) {
      auto members = segments.members(s);
      if (members.empty()) continue;
      const double w = 1.0 / static_cast<double>(members.size());
      for (std::size_t u : members) {
        for (std::size_t j = 0; j < m; ++j) gx[u * m + j] += w * g[s * m + j];
      }
    }
  });
}

Var head_scores(Tape& t, Var keys, Var query, std::size_t heads) {
  const Tensor& K = t.value(keys);
  const Tensor& Q = t.value(query);
  const std::size_t n = K.rows(), d = K.cols();
  require(heads >= 1 && d % heads == 0, "head_scores: width must be divisible by head count");
  require(Q.size() == d, "head_scores: query width must match key width");
  const std::size_t dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor S = Tensor::matrix(n, heads);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t h = 0; h < heads; ++h) {
      double acc = 0.0;
      for (std::size_t j = h * dh; j < (h + 1) * dh; ++j) acc += K(u, j) * Q[j];
      S(u, h) = acc * inv_sqrt;
    }
  }
  return t.push(std::move(S), {keys, query},
                [keys, query, n, d, heads, dh, inv_sqrt](Tape& t, Var self) {
                  const std::vector<double>& g = t.grad(self);
                  const Tensor& K = t.value(keys);
                  const Tensor& Q = t.value(query);
                  if (t.needs_grad(keys)) {
                    std::vector<double>& gk = t.grad(keys);
                    for (std::size_t u = 0; u < n; ++u) {
                      for (std::size_t h = 0; h < heads; ++h) {
                        const double gs = g[u * heads + h] * inv_sqrt;
                        for (std::size_t j = h * dh; j < (h + 1) * dh; ++j) gk[u * d + j] += gs * Q[j];
                      }
                    }
                  }
                  if (t.needs_grad(query)) {
                    std::vector<double>& gq = t.grad(query);
                    for (std::size_t u = 0; u < n; ++u) {
                      for (std::size_t h = 0; h < heads; ++h) {
                        const double gs = g[u * heads + h] * inv_sqrt;
                        for (std::size_t j = h * dh; j < (h + 1) * dh; ++j) gq[j] += gs * K(u, j);
                      }
                    }
                  }
                });
}

Var segment_attention(Tape& t, Var scores, Var values, const Segments& segments,
                      std::size_t heads, std::vector<double>* weights_out) {
  const Tensor& S = t.value(scores);
  const Tensor& V = t.value(values);
  const std::size_t d = V.cols();
  require(S.cols() == heads && S.rows() == V.rows(),
          "segment_attention: scores must be rows(values) x heads");
  require(heads >= 1 && d % heads == 0, "segment_attention: width must be divisible by heads");
  const std::size_t dh = d / heads;
  Tensor Y = Tensor::matrix(segments.count(), d);
  std::vector<double> weights(segments.total() * heads);
  std::vector<double> logits;
  for (std::size_t s = 0; s < segments.count(); ++s) {
    auto members = segments.members(s);
    if (members.empty()) continue;
    const std::size_t base = segments.offsets[s];
    logits.resize(members.size());
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t p = 0; p < members.size(); ++p) {
        require(members[p] < S.rows(), "segment_attention: member index out of range");
        logits[p] = S(members[p], h);
      }
      std::vector<double> w = softmax(logits);
      for (std::size_t p = 0; p < members.size(); ++p) {
        weights[(base + p) * heads + h] = w[p];
        const double* vrow = V.data().data() + members[p] * V.cols() + h * dh;
        double* yrow = &Y(s, h * dh);
        for (std::size_t j = 0; j < dh; ++j) yrow[j] += w[p] * vrow[j];
      }
    }
  }
  if (weights_out != nullptr) *weights_out = weights;
  return t.push(
      std::move(Y), {scores, values},
      [scores, values, segments, heads, d, dh, weights = std::move(weights)](Tape& t, Var self) {
        const std::vector<double>& g = t.grad(self);
        const Tensor& V = t.value(values);
        const bool want_s = t.needs_grad(scores);
        const bool want_v = t.needs_grad(values);
        std::vector<double> dw;
        for (std::size_t s = 0; s < segments.count(); ++s) {
          auto members = segments.members(s);
          if (members.empty()) continue;
          const std::size_t base = segments.offsets[s];
          dw.resize(members.size());
          for (std::size_t h = 0; h < heads; ++h) {
            const double* grow = g.data() + s * d + h * dh;
            double weighted = 0.0;
            for (std::size_t p = 0; p < members.size(); ++p) {
              const double w = weights[(base + p) * heads + h];
              const double* vrow = V.data().data() + members[p] * V.cols() + h * dh;
              double acc = 0.0;
              for (std::size_t j = 0; j < dh; ++j) acc += grow[j] * vrow[j];
              dw[p] = acc;
              weighted += w * acc;
              if (want_v) {
                std::vector<double>& gv = t.grad(values);
                double* gvrow = gv.data() + members[p] * d + h * dh;
                for (std::size_t j = 0; j < dh; ++j) gvrow[j] += w * grow[j];
              }
            }
            if (want_s) {
              std::vector<double>& gs = t.grad(scores);
              for (std::size_t p = 0; p < members.size(); ++p) {
                const double w = weights[(base + p) * heads + h];
                gs[members[p] * heads + h] += w * (dw[p] - weighted);
              }
            }
          }
        }
      });
}

Var mask_rows(Tape& t, Var x, std::span<const double> mask) {
  Tensor Y = t.value(x);
  require(mask.size() == Y.rows(), "mask_rows: mask length must equal row count");
  const std::size_t m = Y.cols();
  for (std::size_t r = 0; r < Y.rows(); ++r) {
    for (std::size_t j = 0; j < m; ++j) Y(r, j) *= mask[r];
  }
  std::vector<double> factors(mask.begin(), mask.end());
  return t.push(std::move(Y), {x}, [x, m, factors = std::move(factors)](Tape& t, Var self) {
    const std::vector<double>& g = t.grad(self);
    std::vector<double>& gx = t.grad(x);
    for (std::size_t r = 0; r < factors.size(); ++r) {
      for (std::size_t j = 0; j < m; ++j) gx[r * m + j] += factors[r] * g[r * m + j];
    }
  });
}

Var dropout(Tape& t, Var x, double rate, std::mt19937_64& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0, 1)");
  if (rate == 0.0) return x;
  Tensor Y = t.value(x);
  std::vector<double> keep(Y.size());
  std::bernoulli_distribution coin(1.0 - rate);
  const double inv = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < Y.size(); ++i) {
    keep[i] = coin(rng) ? inv : 0.0;
    Y[i] *= keep[i];
  }
  return t.push(std::move(Y), {x}, [x, keep = std::move(keep)](Tape& t, Var self) {
    const std::vector<double>& g = t.grad(self);
    std::vector<double>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += keep[i] * g[i];
  });
}

Var sum(Tape& t, Var x) {
  double total = 0.0;
  for (double v : t.value(x).data()) total += v;
  return t.push(Tensor::scalar(total), {x}, [x](Tape& t, Var self) {
    const double g = t.grad(self)[0];
    std::vector<double>& gx = t.grad(x);
    for (double& v : gx) v += g;
  });
}

Var mean(Tape& t, Var x) {
  const double n = static_cast<double>(t.value(x).size());
  return scale(t, sum(t, x), 1.0 / n);
}

Var bce(Tape& t, Var probs, const Tensor& labels) {
  const Tensor& P = t.value(probs);
  require_same(P, labels, "bce");
  const std::size_t n = P.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = labels[i];
    if (y != 0.0 && y != 1.0) {
      throw DataError("bce: label " + std::to_string(y) + " at position " + std::to_string(i) +
                      " is not 0 or 1");
    }
    const double p = std::clamp(P[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    total += y == 1.0 ? -std::log(p) : -std::log(1.0 - p);
  }
  total /= static_cast<double>(n);
  return t.push(Tensor::scalar(total), {probs}, [probs, labels, n](Tape& t, Var self) {
    const double g = t.grad(self)[0] / static_cast<double>(n);
    const Tensor& P = t.value(probs);
    std::vector<double>& gp = t.grad(probs);
    for (std::size_t i = 0; i < n; ++i) {
      const double p = P[i];
      if (p < kProbabilityClamp || p > 1.0 - kProbabilityClamp) continue;
      gp[i] += labels[i] == 1.0 ? -g / p : g / (1.0 - p);
    }
  });
}

}  // namespace coclust::ops
