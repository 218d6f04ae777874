#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "coclust/hypergraph.hpp"
#include "coclust/segments.hpp"
#include "coclust/tape.hpp"
#include "coclust/tensor.hpp"

namespace coclust {

struct TransformerConfig {
  std::size_t layers = 3;
  std::size_t heads = 4;
  std::size_t hidden = 48;
  std::size_t ffn_hidden = 48;
  std::size_t head_hidden = 48;
  double dropout = 0.0;
  std::size_t input_dim = 0;
  std::size_t label_width = 1;

  /// Throws UsageError unless hidden % heads == 0, layers >= 1 and widths > 0.
  void validate() const;
};

/// Parameters of one set-to-vector attention block: the learned seed query
/// (one slice per head), key/value maps, two layer norms and the FFN.
struct AttentionBlock {
  Tensor query, key, value;
  Tensor norm1_gain, norm1_bias;
  Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  Tensor norm2_gain, norm2_bias;
};

struct MessageLayer {
  AttentionBlock node_to_edge;
  AttentionBlock edge_to_node;
};

struct ModelState {
  TransformerConfig config;
  Tensor input_weight, input_bias;
  std::vector<MessageLayer> layers;
  Tensor head_w1, head_b1, head_w2, head_b2;

  /// Xavier-uniform weights, zero biases, unit layer-norm gains.
  static ModelState init(const TransformerConfig& config, std::uint64_t seed);
  std::vector<NamedTensor> named_parameters();
};

struct BlockVars {
  Var query, key, value;
  Var norm1_gain, norm1_bias;
  Var ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  Var norm2_gain, norm2_bias;
};

BlockVars bind_block(Tape& t, AttentionBlock& block);

/// Dropout source for training passes; rate 0 never touches the generator.
struct DropoutContext {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;
};

/// Batched block over many sets at once. Row s of the result aggregates the
/// rows of `source` listed in segment s:
///   Y   = LayerNorm(mean(S) + concat_i softmax(q_i (S K_i)^T / sqrt(d/h)) S V_i)
///   out = LayerNorm(Y + FFN(Y))
/// Empty segments produce zero rows. attention_out, when given, receives the
/// weights as [incidence][head].
Var attention_block(Tape& t, const BlockVars& p, Var source, const Segments& segments,
                    std::size_t heads, const DropoutContext& dropout = {},
                    std::vector<double>* attention_out = nullptr);

/// Multi-head seed-query attention over one set (rows of S): the per-head
/// outputs concatenated into a 1 x d row, without residual or norms.
Var scaled_attention(Tape& t, const BlockVars& p, Var set, std::size_t heads);
/// attention_block applied to one set: a 1 x d row.
Var self_att_block(Tape& t, const BlockVars& p, Var set, std::size_t heads);

struct LayerOutput {
  Var edges;
  Var nodes;
};

/// Hyperedges aggregate their members from node_embeddings, then nodes
/// aggregate their incident hyperedges from the fresh edge embeddings.
LayerOutput message_pass_layer(Tape& t, const BlockVars& node_to_edge,
                               const BlockVars& edge_to_node, const Hypergraph& g,
                               Var node_embeddings, std::size_t heads,
                               const DropoutContext& dropout = {},
                               std::vector<double>* edge_attention_out = nullptr);

struct HeadVars {
  Var w1, b1, w2, b2;
};

/// sigmoid(MLP(concat of per-layer hyperedge embeddings)).
Var predict(Tape& t, const HeadVars& head, std::span<const Var> edge_layers);

struct ForwardOptions {
  DropoutContext dropout;
  /// Keep the final layer's node-to-edge attention weights.
  bool capture_attention = false;
};

struct ForwardPass {
  Var projected;
  std::vector<Var> node_layers;  // X^(1..L)
  std::vector<Var> edge_layers;  // E^(1..L)
  Var probs;                     // |E| x label_width
  std::vector<double> final_edge_attention;
};

/// Input projection, L message-passing layers and the prediction head.
/// features must be |V| x config.input_dim.
ForwardPass forward(Tape& t, ModelState& model, const Hypergraph& g, const Tensor& features,
                    const ForwardOptions& options = {});

/// Mean binary cross-entropy with clamped probabilities (plain evaluation).
double bce_loss(std::span<const double> probs, std::span<const double> labels);

}  // namespace coclust
