#include "coclust/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "coclust/error.hpp"
#include "coclust/ops.hpp"

namespace coclust {

namespace {

Tensor xavier(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor w = Tensor::matrix(fan_in, fan_out);
  for (double& x : w.storage()) x = dist(rng);
  return w;
}

Tensor row(std::size_t n, double fill) { return Tensor::matrix(1, n, fill); }

AttentionBlock init_block(const TransformerConfig& c, std::mt19937_64& rng) {
  AttentionBlock b;
  const std::size_t d = c.hidden;
  const double limit = 1.0 / std::sqrt(static_cast<double>(d / c.heads));
  std::uniform_real_distribution<double> qdist(-limit, limit);
  b.query = row(d, 0.0);
  for (double& x : b.query.storage()) x = qdist(rng);
  b.key = xavier(d, d, rng);
  b.value = xavier(d, d, rng);
  b.norm1_gain = row(d, 1.0);
  b.norm1_bias = row(d, 0.0);
  b.ffn_w1 = xavier(d, c.ffn_hidden, rng);
  b.ffn_b1 = row(c.ffn_hidden, 0.0);
  b.ffn_w2 = xavier(c.ffn_hidden, d, rng);
  b.ffn_b2 = row(d, 0.0);
  b.norm2_gain = row(d, 1.0);
  b.norm2_bias = row(d, 0.0);
  return b;
}

void name_block(std::vector<NamedTensor>& out, const std::string& prefix, AttentionBlock& b) {
  out.push_back({prefix + ".query", &b.query});
  out.push_back({prefix + ".key", &b.key});
  out.push_back({prefix + ".value", &b.value});
  out.push_back({prefix + ".norm1_gain", &b.norm1_gain});
  out.push_back({prefix + ".norm1_bias", &b.norm1_bias});
  out.push_back({prefix + ".ffn_w1", &b.ffn_w1});
  out.push_back({prefix + ".ffn_b1", &b.ffn_b1});
  out.push_back({prefix + ".ffn_w2", &b.ffn_w2});
  out.push_back({prefix + ".ffn_b2", &b.ffn_b2});
  out.push_back({prefix + ".norm2_gain", &b.norm2_gain});
  out.push_back({prefix + ".norm2_bias", &b.norm2_bias});
}

}  // namespace

void TransformerConfig::validate() const {
  if (layers < 1) throw UsageError("transformer: need at least one layer");
  if (heads < 1 || hidden < 1 || hidden % heads != 0) {
    throw UsageError("transformer: hidden width " + std::to_string(hidden) +
                     " must be a positive multiple of heads " + std::to_string(heads));
  }
  if (ffn_hidden < 1 || head_hidden < 1 || input_dim < 1 || label_width < 1) {
    throw UsageError("transformer: widths must be positive");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw UsageError("transformer: dropout must be in [0, 1)");
}

ModelState ModelState::init(const TransformerConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  ModelState m;
  m.config = config;
  m.input_weight = xavier(config.input_dim, config.hidden, rng);
  m.input_bias = row(config.hidden, 0.0);
  for (std::size_t l = 0; l < config.layers; ++l) {
    MessageLayer layer;
    layer.node_to_edge = init_block(config, rng);
    layer.edge_to_node = init_block(config, rng);
    m.layers.push_back(std::move(layer));
  }
  m.head_w1 = xavier(config.layers * config.hidden, config.head_hidden, rng);
  m.head_b1 = row(config.head_hidden, 0.0);
  m.head_w2 = xavier(config.head_hidden, config.label_width, rng);
  m.head_b2 = row(config.label_width, 0.0);
  for (NamedTensor& p : m.named_parameters()) p.tensor->set_requires_grad(true);
  return m;
}

std::vector<NamedTensor> ModelState::named_parameters() {
  std::vector<NamedTensor> out;
  out.push_back({"input.weight", &input_weight});
  out.push_back({"input.bias", &input_bias});
  for (std::size_t l = 0; l < layers.size(); ++l) {
    name_block(out, "layer" + std::to_string(l) + ".v2e", layers[l].node_to_edge);
    name_block(out, "layer" + std::to_string(l) + ".e2v", layers[l].edge_to_node);
  }
  out.push_back({"head.w1", &head_w1});
  out.push_back({"head.b1", &head_b1});
  out.push_back({"head.w2", &head_w2});
  out.push_back({"head.b2", &head_b2});
  return out;
}

BlockVars bind_block(Tape& t, AttentionBlock& b) {
  return BlockVars{t.parameter(b.query),      t.parameter(b.key),        t.parameter(b.value),
                   t.parameter(b.norm1_gain), t.parameter(b.norm1_bias), t.parameter(b.ffn_w1),
                   t.parameter(b.ffn_b1),     t.parameter(b.ffn_w2),     t.parameter(b.ffn_b2),
                   t.parameter(b.norm2_gain), t.parameter(b.norm2_bias)};
}

Var attention_block(Tape& t, const BlockVars& p, Var source, const Segments& segments,
                    std::size_t heads, const DropoutContext& dropout,
                    std::vector<double>* attention_out) {
  Var keys = ops::matmul(t, source, p.key);
  Var values = ops::matmul(t, source, p.value);
  Var scores = ops::head_scores(t, keys, p.query, heads);
  Var attended = ops::segment_attention(t, scores, values, segments, heads, attention_out);
  Var pooled = ops::segment_mean(t, source, segments);
  Var y = ops::layer_norm(t, ops::add(t, pooled, attended), p.norm1_gain, p.norm1_bias);
  Var hidden = ops::relu(t, ops::add_bias(t, ops::matmul(t, y, p.ffn_w1), p.ffn_b1));
  if (dropout.rate > 0.0) {
    if (dropout.rng == nullptr) throw UsageError("attention_block: dropout needs a generator");
    hidden = ops::dropout(t, hidden, dropout.rate, *dropout.rng);
  }
  Var ffn = ops::add_bias(t, ops::matmul(t, hidden, p.ffn_w2), p.ffn_b2);
  Var out = ops::layer_norm(t, ops::add(t, y, ffn), p.norm2_gain, p.norm2_bias);

  std::vector<double> mask(segments.count(), 1.0);
  bool any_empty = false;
  for (std::size_t s = 0; s < segments.count(); ++s) {
    if (segments.members(s).empty()) {
      mask[s] = 0.0;
      any_empty = true;
    }
  }
  return any_empty ? ops::mask_rows(t, out, mask) : out;
}

namespace {

Segments whole_set(std::size_t rows) {
  Segments s;
  std::vector<std::size_t> all(rows);
  for (std::size_t i = 0; i < rows; ++i) all[i] = i;
  s.append(all);
  return s;
}

}  // namespace

Var scaled_attention(Tape& t, const BlockVars& p, Var set, std::size_t heads) {
  if (t.value(set).rows() == 0) throw UsageError("scaled_attention: empty set");
  Segments one = whole_set(t.value(set).rows());
  Var keys = ops::matmul(t, set, p.key);
  Var values = ops::matmul(t, set, p.value);
  Var scores = ops::head_scores(t, keys, p.query, heads);
  return ops::segment_attention(t, scores, values, one, heads);
}

Var self_att_block(Tape& t, const BlockVars& p, Var set, std::size_t heads) {
  Segments one = whole_set(t.value(set).rows());
  return attention_block(t, p, set, one, heads);
}

LayerOutput message_pass_layer(Tape& t, const BlockVars& node_to_edge,
                               const BlockVars& edge_to_node, const Hypergraph& g,
                               Var node_embeddings, std::size_t heads,
                               const DropoutContext& dropout,
                               std::vector<double>* edge_attention_out) {
  if (t.value(node_embeddings).rows() != g.node_count()) {
    throw UsageError("message_pass_layer: node embedding rows must equal node count");
  }
  LayerOutput out;
  out.edges = attention_block(t, node_to_edge, node_embeddings, g.edge_segments(), heads, dropout,
                              edge_attention_out);
  out.nodes = attention_block(t, edge_to_node, out.edges, g.node_segments(), heads, dropout);
  return out;
}

Var predict(Tape& t, const HeadVars& head, std::span<const Var> edge_layers) {
  Var joined = edge_layers.size() == 1 ? edge_layers[0] : ops::concat_cols(t, edge_layers);
  Var hidden = ops::relu(t, ops::add_bias(t, ops::matmul(t, joined, head.w1), head.b1));
  Var logits = ops::add_bias(t, ops::matmul(t, hidden, head.w2), head.b2);
  return ops::sigmoid(t, logits);
}

ForwardPass forward(Tape& t, ModelState& model, const Hypergraph& g, const Tensor& features,
                    const ForwardOptions& options) {
  const TransformerConfig& c = model.config;
  if (features.rows() != g.node_count() || features.cols() != c.input_dim) {
    throw UsageError("forward: features " + features.shape_string() + " do not match " +
                     std::to_string(g.node_count()) + " nodes x input_dim " +
                     std::to_string(c.input_dim));
  }
  ForwardPass pass;
  Var x = t.constant(features);
  pass.projected = ops::add_bias(t, ops::matmul(t, x, t.parameter(model.input_weight)),
                                 t.parameter(model.input_bias));
  Var current = pass.projected;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    BlockVars v2e = bind_block(t, model.layers[l].node_to_edge);
    BlockVars e2v = bind_block(t, model.layers[l].edge_to_node);
    const bool last = l + 1 == model.layers.size();
    std::vector<double>* capture =
        last && options.capture_attention ? &pass.final_edge_attention : nullptr;
    LayerOutput out = message_pass_layer(t, v2e, e2v, g, current, c.heads, options.dropout, capture);
    pass.edge_layers.push_back(out.edges);
    pass.node_layers.push_back(out.nodes);
    current = out.nodes;
  }
  HeadVars head{t.parameter(model.head_w1), t.parameter(model.head_b1),
                t.parameter(model.head_w2), t.parameter(model.head_b2)};
  pass.probs = predict(t, head, pass.edge_layers);
  return pass;
}

double bce_loss(std::span<const double> probs, std::span<const double> labels) {
  if (probs.size() != labels.size() || probs.empty()) {
    throw UsageError("bce_loss: probabilities and labels must have equal nonzero length");
  }
  Tape t;
  Var p = t.constant(Tensor::row_vector(std::vector<double>(probs.begin(), probs.end())));
  Tensor y = Tensor::row_vector(std::vector<double>(labels.begin(), labels.end()));
  return t.value(ops::bce(t, p, y))[0];
}

}  // namespace coclust
