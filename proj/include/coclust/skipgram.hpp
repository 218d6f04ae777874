#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "coclust/embedding_table.hpp"
#include "coclust/hypergraph.hpp"

namespace coclust {

struct SkipGramConfig {
  std::size_t dim = 128;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  /// Starting learning rate, decayed linearly to 1e-4 of itself.
  double learning_rate = 0.025;
  std::uint64_t seed = 1;
};

struct SkipGramResult {
  EmbeddingTable table;
  /// Logistic loss of each (center, context) update, in training order.
  std::vector<double> pair_losses;
};

/// Skip-gram with negative sampling over node walks. Negatives come from the
/// unigram^0.75 distribution and never equal the context; pairs of a node with
/// itself are skipped.
/// Only the input vectors are returned. Single-threaded and deterministic.
SkipGramResult train_skipgram(const WalkCorpus& corpus, const std::vector<std::string>& vocab,
                              const SkipGramConfig& config);

}  // namespace coclust
