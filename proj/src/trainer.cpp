#include "coclust/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "coclust/adam.hpp"
#include "coclust/error.hpp"
#include "coclust/metrics.hpp"
#include "coclust/ops.hpp"

namespace coclust {

namespace {

constexpr std::uint64_t kSplitStream = 0x73706c6974;
constexpr std::uint64_t kInitStream = 0x696e6974;
constexpr std::uint64_t kProjectionStream = 0x70726f6a;
constexpr std::uint64_t kKMeansStream = 0x6b6d65616e73;
constexpr std::uint64_t kStepStream = 0x73746570;

std::size_t resolve_layer(std::size_t requested, std::size_t layers) {
  if (requested == 0) return layers - 1;
  if (requested > layers) {
    throw UsageError("cluster_layer " + std::to_string(requested) + " exceeds layer count " +
                     std::to_string(layers));
  }
  return requested - 1;
}

void require_finite(double value, std::size_t epoch, const char* component) {
  if (!std::isfinite(value)) {
    throw NumericalError("epoch " + std::to_string(epoch) + ": " + component +
                         " loss is not finite");
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw UsageError("alpha and beta must be >= 0");
  if (!(margin > 0.0)) throw UsageError("margin must be positive");
  if (!(learning_rate > 0.0)) throw UsageError("learning rate must be positive");
  if (epochs == 0) throw UsageError("epochs must be positive");
  if (warmup_epochs > epochs) throw UsageError("warmup_epochs must not exceed epochs");
  if (clustering && clusters < 2) throw UsageError("clustering needs K >= 2");
  if (projection_dim == 0) throw UsageError("projection_dim must be positive");
  double sum = 0.0;
  for (double f : split) {
    if (!(f > 0.0)) throw UsageError("split fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw UsageError("split fractions must sum to 1");
}

double total_loss(double cls, double node_kl, double edge_kl, double align, double alpha,
                  double beta) {
  return cls + alpha * (node_kl + edge_kl) + beta * align;
}

SplitIndex split_items(std::vector<std::size_t> items, const std::array<double, 3>& fractions,
                       std::uint64_t seed) {
  const std::size_t n = items.size();
  if (n < 3) throw DataError("split needs at least 3 labeled items, got " + std::to_string(n));
  for (double f : fractions) {
    if (!(f > 0.0)) throw UsageError("split fractions must be positive");
  }
  const double sum = fractions[0] + fractions[1] + fractions[2];
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    const double exact = static_cast<double>(n) * fractions[s] / sum;
    sizes[s] = static_cast<std::size_t>(std::floor(exact));
    remainder[s] = exact - static_cast<double>(sizes[s]);
    assigned += sizes[s];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++sizes[order[i % 3]];

  std::mt19937_64 rng(mix_seed(seed, kSplitStream));
  std::shuffle(items.begin(), items.end(), rng);
  SplitIndex split;
  split.seed = seed;
  auto first = items.begin();
  split.train.assign(first, first + static_cast<std::ptrdiff_t>(sizes[0]));
  first += static_cast<std::ptrdiff_t>(sizes[0]);
  split.validation.assign(first, first + static_cast<std::ptrdiff_t>(sizes[1]));
  first += static_cast<std::ptrdiff_t>(sizes[1]);
  split.test.assign(first, items.end());
  return split;
}

SplitIndex split_dataset(const Hypergraph& g, const std::array<double, 3>& fractions,
                         std::uint64_t seed) {
  return split_items(g.labeled_edges(), fractions, seed);
}

CoClusterModel CoClusterModel::init(const TransformerConfig& model, const TrainConfig& train) {
  CoClusterModel m;
  m.backbone = ModelState::init(model, mix_seed(train.seed, kInitStream));
  m.clusters = train.clusters;
  m.node_centroids = Tensor::matrix(train.clusters, model.hidden);
  m.edge_centroids = Tensor::matrix(train.clusters, model.hidden);
  std::mt19937_64 rng(mix_seed(train.seed, kProjectionStream));
  m.node_projection = ProjectionHead::init(model.hidden, train.projection_dim, rng);
  m.edge_projection = ProjectionHead::init(model.hidden, train.projection_dim, rng);
  for (NamedTensor& p : m.cluster_parameters()) p.tensor->set_requires_grad(true);
  return m;
}

std::vector<NamedTensor> CoClusterModel::cluster_parameters() {
  std::vector<NamedTensor> out{{"cluster.node_centroids", &node_centroids},
                               {"cluster.edge_centroids", &edge_centroids}};
  for (NamedTensor& p : node_projection.named_parameters("align.node")) out.push_back(p);
  for (NamedTensor& p : edge_projection.named_parameters("align.edge")) out.push_back(p);
  return out;
}

std::vector<NamedTensor> CoClusterModel::named_parameters() {
  std::vector<NamedTensor> out = backbone.named_parameters();
  for (NamedTensor& p : cluster_parameters()) out.push_back(p);
  return out;
}

std::vector<NamedTensor> CoClusterModel::named_buffers() {
  std::vector<NamedTensor> out = node_projection.named_buffers("align.node");
  for (NamedTensor& p : edge_projection.named_buffers("align.edge")) out.push_back(p);
  return out;
}

Tensor label_matrix(const Hypergraph& g, std::span<const std::size_t> edges) {
  Tensor y = Tensor::matrix(edges.size(), g.label_width());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (!g.is_labeled(edges[i])) {
      throw DataError("hyperedge " + g.edge_ids()[edges[i]] + " has no label");
    }
    auto labels = g.labels(edges[i]);
    for (std::size_t s = 0; s < labels.size(); ++s) y(i, s) = labels[s];
  }
  return y;
}

std::optional<double> mean_auroc(const Tensor& probs, const Hypergraph& g,
                                 std::span<const std::size_t> edges) {
  if (edges.empty()) return std::nullopt;
  Tensor p = Tensor::matrix(edges.size(), probs.cols());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    for (std::size_t s = 0; s < probs.cols(); ++s) p(i, s) = probs(edges[i], s);
  }
  EvalReport report = evaluate_predictions(p, label_matrix(g, edges));
  if (report.auroc_slots == 0) return std::nullopt;
  return report.auroc;
}

Inference infer(CoClusterModel& model, const Hypergraph& g, const Tensor& features,
                std::size_t cluster_layer) {
  Tape t;
  ForwardOptions options;
  options.capture_attention = true;
  ForwardPass pass = forward(t, model.backbone, g, features, options);
  const std::size_t layer = resolve_layer(cluster_layer, pass.node_layers.size());
  Inference out;
  out.probs = t.value(pass.probs);
  out.node_embeddings = t.value(pass.node_layers[layer]);
  out.edge_embeddings = t.value(pass.edge_layers[layer]);
  out.edge_attention = std::move(pass.final_edge_attention);
  if (model.clusters_ready) {
    auto state = [](Domain d, const Tensor& x, const Tensor& u) {
      ClusterState s;
      s.domain = d;
      s.clusters = u.rows();
      s.centroids = u;
      s.assignments = soft_assign(x, u);
      s.target = target_distribution(s.assignments);
      return s;
    };
    out.nodes = state(Domain::node, out.node_embeddings, model.node_centroids);
    out.edges = state(Domain::hyperedge, out.edge_embeddings, model.edge_centroids);
    Tape a;
    Var cv = soft_centroids(a, a.constant(out.node_embeddings), a.constant(out.nodes->assignments));
    Var ce = soft_centroids(a, a.constant(out.edge_embeddings), a.constant(out.edges->assignments));
    out.node_projection = a.value(project(a, model.node_projection, cv, false));
    out.edge_projection = a.value(project(a, model.edge_projection, ce, false));
  }
  return out;
}

TrainResult train(const Hypergraph& g, const Tensor& features, CoClusterModel model,
                  const TrainConfig& config) {
  return train(g, features, std::move(model), config,
               split_dataset(g, config.split, config.seed));
}

TrainResult train(const Hypergraph& g, const Tensor& features, CoClusterModel model,
                  const TrainConfig& config, const SplitIndex& split) {
  config.validate();
  if (split.train.empty()) throw DataError("training split has no labeled hyperedges");
  if (model.backbone.config.label_width != g.label_width()) {
    throw UsageError("model label width " + std::to_string(model.backbone.config.label_width) +
                     " does not match data label width " + std::to_string(g.label_width()));
  }
  const std::size_t layer = resolve_layer(config.cluster_layer, model.backbone.layers.size());
  const bool joint = config.clustering;

  Adam backbone_opt(model.backbone.named_parameters(), {.learning_rate = config.learning_rate});
  std::optional<Adam> cluster_opt;
  std::mt19937_64 rng(mix_seed(config.seed, kStepStream));
  const double dropout = model.backbone.config.dropout;

  TrainResult result;
  result.split = split;
  std::optional<double> best_auroc;
  bool have_best = false;

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const bool phase2 = epoch >= config.warmup_epochs;
    const std::size_t epoch_no = epoch + 1;
    if (phase2 && joint && !model.clusters_ready) {
      Inference now = infer(model, g, features, config.cluster_layer);
      model.node_centroids.storage() =
          kmeans_init(now.node_embeddings, config.clusters, mix_seed(config.seed, kKMeansStream, 0))
              .storage();
      model.edge_centroids.storage() =
          kmeans_init(now.edge_embeddings, config.clusters, mix_seed(config.seed, kKMeansStream, 1))
              .storage();
      model.clusters_ready = true;
      cluster_opt.emplace(model.cluster_parameters(),
                          AdamOptions{.learning_rate = config.learning_rate});
    }

    batches.clear();
    if (config.batch_size == 0 || config.batch_size >= split.train.size()) {
      batches.push_back(split.train);
    } else {
      std::vector<std::size_t> order = split.train;
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
        const std::size_t end = std::min(order.size(), b + config.batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
      }
    }

    EpochRecord record;
    record.epoch = epoch_no;
    record.phase = phase2 ? 2 : 1;
    Tensor node_target, edge_target;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const std::vector<std::size_t>& batch = batches[b];
      Tape t;
      ForwardOptions options;
      options.dropout = DropoutContext{dropout, &rng};
      ForwardPass pass;
      try {
        pass = forward(t, model.backbone, g, features, options);
      } catch (const NumericalError& err) {
        throw NumericalError("epoch " + std::to_string(epoch_no) + ": forward pass: " + err.what());
      }
      Var cls = ops::bce(t, ops::gather_rows(t, pass.probs, batch), label_matrix(g, batch));
      Var objective = cls;
      double node_kl = 0.0, edge_kl = 0.0, align = 0.0;
      const double cls_value = t.value(cls)[0];
      require_finite(cls_value, epoch_no, "classification");

      if (phase2 && joint) {
        Var x = pass.node_layers[layer];
        Var e = pass.edge_layers[layer];
        Var qv = soft_assign(t, x, t.parameter(model.node_centroids));
        Var qe = soft_assign(t, e, t.parameter(model.edge_centroids));
        if (b == 0) {
          node_target = target_distribution(t.value(qv));
          edge_target = target_distribution(t.value(qe));
        }
        Var lv = kl_cluster_loss(t, node_target, qv, KlReduction::batch_mean);
        Var le;
        if (batches.size() == 1) {
          le = kl_cluster_loss(t, edge_target, qe, KlReduction::batch_mean);
        } else {
          Tensor rows = Tensor::matrix(batch.size(), config.clusters);
          for (std::size_t i = 0; i < batch.size(); ++i) {
            for (std::size_t k = 0; k < config.clusters; ++k) rows(i, k) = edge_target(batch[i], k);
          }
          le = kl_cluster_loss(t, rows, ops::gather_rows(t, qe, batch), KlReduction::batch_mean);
        }
        Var zv = project(t, model.node_projection, soft_centroids(t, x, qv), true);
        Var ze = project(t, model.edge_projection, soft_centroids(t, e, qe), true);
        Var al = triplet_align_loss(t, zv, ze, config.margin);
        node_kl = t.value(lv)[0];
        edge_kl = t.value(le)[0];
        align = t.value(al)[0];
        require_finite(node_kl, epoch_no, "node clustering");
        require_finite(edge_kl, epoch_no, "hyperedge clustering");
        require_finite(align, epoch_no, "alignment");
        // Zero weights leave the terms out of the graph so the backbone
        // trajectory matches a run without them.
        if (config.alpha > 0.0) {
          objective = ops::add(t, objective, ops::scale(t, ops::add(t, lv, le), config.alpha));
        }
        if (config.beta > 0.0) objective = ops::add(t, objective, ops::scale(t, al, config.beta));
        if (b == 0) {
          record.node_kl_at_refresh = node_kl;
          record.edge_kl_at_refresh = edge_kl;
        }
      }

      t.backward(objective);
      try {
        backbone_opt.step();
        if (cluster_opt) cluster_opt->step();
      } catch (const NumericalError& err) {
        throw NumericalError("epoch " + std::to_string(epoch_no) + ": " + err.what());
      }
      record.cls += cls_value;
      record.node_kl += node_kl;
      record.edge_kl += edge_kl;
      record.align += align;
    }
    const double steps = static_cast<double>(batches.size());
    record.cls /= steps;
    record.node_kl /= steps;
    record.edge_kl /= steps;
    record.align /= steps;
    record.total =
        total_loss(record.cls, record.node_kl, record.edge_kl, record.align, config.alpha,
                   config.beta);

    {
      Tape t;
      ForwardPass pass = forward(t, model.backbone, g, features);
      record.val_auroc = mean_auroc(t.value(pass.probs), g, split.validation);
    }
    // With a joint phase, only its epochs compete for the best checkpoint.
    // Ties go to the later epoch.
    const bool eligible = phase2 || config.warmup_epochs >= config.epochs;
    if (eligible) {
      const bool better =
          !have_best || !best_auroc ||
          (record.val_auroc && *record.val_auroc >= *best_auroc);
      if (better) {
        have_best = true;
        best_auroc = record.val_auroc;
        result.best = model;
        result.best_epoch = epoch_no;
      }
    }
    result.history.push_back(record);
  }
  result.last = std::move(model);
  return result;
}

std::size_t kl_trend_violations(const std::vector<EpochRecord>& history, std::size_t window) {
  std::size_t violations = 0;
  for (std::size_t i = 0; i + window < history.size(); ++i) {
    if (history[i].phase != 2) continue;
    const EpochRecord& a = history[i];
    const EpochRecord& b = history[i + window];
    if (b.node_kl_at_refresh > a.node_kl_at_refresh) ++violations;
    if (b.edge_kl_at_refresh > a.edge_kl_at_refresh) ++violations;
  }
  return violations;
}

}  // namespace coclust
