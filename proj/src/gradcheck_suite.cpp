#include "coclust/gradcheck_suite.hpp"

#include <random>

#include "coclust/alignment.hpp"
#include "coclust/clustering.hpp"
#include "coclust/error.hpp"
#include "coclust/ops.hpp"
#include "coclust/trainer.hpp"
#include "coclust/transformer.hpp"

namespace coclust {

namespace {

Tensor normal(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> dist(0.0, sd);
  Tensor t = Tensor::matrix(rows, cols);
  for (double& x : t.storage()) x = dist(rng);
  return t;
}

Hypergraph small_graph(std::size_t width) {
  std::vector<std::string> nodes{"a", "b", "c", "d", "e", "f"};
  std::vector<std::string> edges{"v1", "v2", "v3"};
  std::vector<std::vector<std::size_t>> members{{0, 1, 2}, {2, 3, 4}, {1, 4, 5}};
  std::mt19937_64 rng(100);
  std::vector<std::vector<int>> labels(3, std::vector<int>(width));
  for (auto& row : labels) {
    for (int& y : row) y = static_cast<int>(rng() & 1u);
  }
  return Hypergraph::from_incidence(nodes, edges, members, labels);
}

Hypergraph joint_graph() {
  std::vector<std::string> nodes{"a", "b", "c", "d", "e", "f", "g", "h"};
  std::vector<std::string> edges{"v1", "v2", "v3", "v4"};
  std::vector<std::vector<std::size_t>> members{{0, 1, 2}, {2, 3, 4}, {4, 5, 6, 7}, {0, 7}};
  std::vector<std::vector<int>> labels{{1}, {0}, {1}, {0}};
  return Hypergraph::from_incidence(nodes, edges, members, labels);
}

TransformerConfig tiny_config(std::size_t width) {
  TransformerConfig c;
  c.layers = 2;
  c.heads = 2;
  c.hidden = 4;
  c.ffn_hidden = 4;
  c.head_hidden = 3;
  c.input_dim = 5;
  c.label_width = width;
  return c;
}

Tensor all_labels(const Hypergraph& g) {
  std::vector<std::size_t> edges(g.edge_count());
  for (std::size_t e = 0; e < edges.size(); ++e) edges[e] = e;
  return label_matrix(g, edges);
}

void randomize_head(ProjectionHead& head, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mean(-0.5, 0.5), var(0.5, 2.0);
  for (double& x : head.running_mean.storage()) x = mean(rng);
  for (double& x : head.running_var.storage()) x = var(rng);
  for (double& x : head.norm_gain.storage()) x += mean(rng);
  for (double& x : head.norm_bias.storage()) x = mean(rng);
  for (double& x : head.b1.storage()) x = mean(rng);
  for (double& x : head.b2.storage()) x = mean(rng);
}

SuiteCheck check_transformer(const GradCheckOptions& options) {
  std::mt19937_64 rng(101);
  const Hypergraph g = small_graph(25);
  const Tensor features = normal(6, 5, rng);
  ModelState model = ModelState::init(tiny_config(25), 11);
  const Tensor labels = all_labels(g);
  auto loss = [&](Tape& t) {
    ForwardPass pass = forward(t, model, g, features);
    return ops::bce(t, pass.probs, labels);
  };
  return {"transformer.bce", grad_check(loss, model.named_parameters(), options)};
}

SuiteCheck check_self_attention(const GradCheckOptions& options) {
  std::mt19937_64 rng(102);
  TransformerConfig c = tiny_config(1);
  ModelState model = ModelState::init(c, 12);
  Tensor set = normal(5, 4, rng);
  set.set_requires_grad(true);
  AttentionBlock& block = model.layers[0].node_to_edge;
  const Tensor weights = normal(4, 1, rng);
  auto loss = [&](Tape& t) {
    BlockVars p = bind_block(t, block);
    Var out = self_att_block(t, p, t.parameter(set), c.heads);
    return ops::sum(t, ops::matmul(t, out, t.constant(weights)));
  };
  std::vector<NamedTensor> params{{"set", &set}};
  for (NamedTensor& p : model.named_parameters()) {
    if (p.name.rfind("layer0.v2e", 0) == 0) params.push_back(p);
  }
  return {"transformer.self_att_block", grad_check(loss, params, options)};
}

SuiteCheck check_cluster(const GradCheckOptions& options, KlReduction reduction,
                         const char* name) {
  std::mt19937_64 rng(103);
  Tensor x = normal(8, 4, rng);
  Tensor u = normal(3, 4, rng);
  const Tensor p = target_distribution(soft_assign(normal(8, 4, rng), u));
  auto loss = [&](Tape& t) {
    return kl_cluster_loss(t, p, soft_assign(t, t.parameter(x), t.parameter(u)), reduction);
  };
  return {name, grad_check(loss, {{"points", &x}, {"centroids", &u}}, options)};
}

SuiteCheck check_align(const GradCheckOptions& options, bool training) {
  std::mt19937_64 rng(104);
  Tensor x = normal(8, 4, rng);
  Tensor e = normal(4, 4, rng);
  Tensor uv = normal(3, 4, rng);
  Tensor ue = normal(3, 4, rng);
  ProjectionHead hv = ProjectionHead::init(4, 3, rng);
  ProjectionHead he = ProjectionHead::init(4, 3, rng);
  randomize_head(hv, rng);
  randomize_head(he, rng);
  auto loss = [&](Tape& t) {
    Var xv = t.parameter(x), xe = t.parameter(e);
    Var qv = soft_assign(t, xv, t.parameter(uv));
    Var qe = soft_assign(t, xe, t.parameter(ue));
    Var zv = project(t, hv, soft_centroids(t, xv, qv), training);
    Var ze = project(t, he, soft_centroids(t, xe, qe), training);
    return triplet_align_loss(t, zv, ze, 1.0);
  };
  std::vector<NamedTensor> params{{"node_points", &x},
                                  {"edge_points", &e},
                                  {"node_centroids", &uv},
                                  {"edge_centroids", &ue}};
  for (NamedTensor& p : hv.named_parameters("node_head")) params.push_back(p);
  for (NamedTensor& p : he.named_parameters("edge_head")) params.push_back(p);
  return {training ? "align.batch_statistics" : "align.running_statistics",
          grad_check(loss, params, options)};
}

SuiteCheck check_primitives(const GradCheckOptions& options) {
  std::mt19937_64 rng(105);
  Tensor a = normal(4, 3, rng);
  Tensor b = normal(3, 5, rng);
  Tensor gain = normal(1, 5, rng);
  Tensor bias = normal(1, 5, rng);
  Tensor scores_w = normal(5, 2, rng);
  Tensor query = normal(1, 4, rng);
  Segments segs;
  segs.append(std::vector<std::size_t>{0, 2});
  segs.append(std::vector<std::size_t>{});
  segs.append(std::vector<std::size_t>{1, 2, 3});
  const std::vector<std::size_t> rows{3, 0, 0, 2};
  const Tensor labels = Tensor::matrix(4, 2, std::vector<double>{1, 0, 0, 1, 1, 1, 0, 0});
  auto loss = [&](Tape& t) {
    Var h = ops::matmul(t, t.parameter(a), t.parameter(b));
    Var n = ops::layer_norm(t, h, t.parameter(gain), t.parameter(bias));
    Var s = ops::softmax_rows(t, n);
    Var cat = ops::concat_cols(t, std::vector<Var>{s, ops::sigmoid(t, h)});
    Var picked = ops::gather_rows(t, cat, rows);
    Var keys = ops::matmul(t, ops::gather_rows(t, n, std::vector<std::size_t>{0, 1, 2, 3}),
                           ops::matmul(t, t.parameter(scores_w), t.constant(Tensor::matrix(2, 4, 0.5))));
    Var sc = ops::head_scores(t, keys, t.parameter(query), 2);
    Var att = ops::segment_attention(t, sc, keys, segs, 2);
    Var pooled = ops::segment_mean(t, keys, segs);
    Var probs = ops::sigmoid(t, ops::matmul(t, picked, t.constant(Tensor::matrix(10, 2, 0.3))));
    Var total = ops::add(t, ops::bce(t, probs, labels), ops::mean(t, ops::add(t, att, pooled)));
    return ops::add(t, total, ops::sum(t, ops::relu(t, ops::scale(t, pooled, 0.5))));
  };
  return {"primitives",
          grad_check(loss,
                     {{"a", &a}, {"b", &b}, {"gain", &gain}, {"bias", &bias},
                      {"scores_w", &scores_w}, {"query", &query}},
                     options)};
}

SuiteCheck check_joint(const GradCheckOptions& options) {
  std::mt19937_64 rng(106);
  const Hypergraph g = joint_graph();
  const Tensor features = normal(8, 5, rng);
  TrainConfig tc;
  tc.clusters = 3;
  tc.projection_dim = 3;
  tc.seed = 13;
  CoClusterModel model = CoClusterModel::init(tiny_config(1), tc);
  model.node_centroids = normal(3, 4, rng);
  model.edge_centroids = normal(3, 4, rng);
  model.node_centroids.set_requires_grad(true);
  model.edge_centroids.set_requires_grad(true);
  randomize_head(model.node_projection, rng);
  randomize_head(model.edge_projection, rng);
  const Tensor labels = all_labels(g);
  Tensor pv, pe;
  {
    Tape t;
    ForwardPass pass = forward(t, model.backbone, g, features);
    pv = target_distribution(soft_assign(t.value(pass.node_layers.back()), model.node_centroids));
    pe = target_distribution(soft_assign(t.value(pass.edge_layers.back()), model.edge_centroids));
  }
  const double alpha = 10.0, beta = 0.1;
  auto loss = [&](Tape& t) {
    ForwardPass pass = forward(t, model.backbone, g, features);
    Var x = pass.node_layers.back(), e = pass.edge_layers.back();
    Var qv = soft_assign(t, x, t.parameter(model.node_centroids));
    Var qe = soft_assign(t, e, t.parameter(model.edge_centroids));
    Var lv = kl_cluster_loss(t, pv, qv, KlReduction::batch_mean);
    Var le = kl_cluster_loss(t, pe, qe, KlReduction::batch_mean);
    Var zv = project(t, model.node_projection, soft_centroids(t, x, qv), false);
    Var ze = project(t, model.edge_projection, soft_centroids(t, e, qe), false);
    Var al = triplet_align_loss(t, zv, ze, 1.0);
    Var total = ops::add(t, ops::bce(t, pass.probs, labels), ops::scale(t, ops::add(t, lv, le), alpha));
    return ops::add(t, total, ops::scale(t, al, beta));
  };
  return {"joint.objective", grad_check(loss, model.named_parameters(), options)};
}

}  // namespace

std::vector<SuiteCheck> run_gradcheck_suite(const std::string& module,
                                            const GradCheckOptions& options) {
  const bool all = module == "all";
  if (!all && module != "transformer" && module != "cluster" && module != "align") {
    throw UsageError("unknown gradcheck module '" + module + "' (all, transformer, cluster, align)");
  }
  std::vector<SuiteCheck> out;
  if (all) out.push_back(check_primitives(options));
  if (all || module == "transformer") {
    out.push_back(check_transformer(options));
    out.push_back(check_self_attention(options));
  }
  if (all || module == "cluster") {
    out.push_back(check_cluster(options, KlReduction::sum, "cluster.kl_sum"));
    out.push_back(check_cluster(options, KlReduction::batch_mean, "cluster.kl_batch_mean"));
  }
  if (all || module == "align") {
    out.push_back(check_align(options, false));
    out.push_back(check_align(options, true));
  }
  if (all) out.push_back(check_joint(options));
  return out;
}

}  // namespace coclust
