#pragma once

#include <string>
#include <vector>

#include "coclust/tensor.hpp"

namespace coclust {

enum class EmbeddingSource { structural, textual };

/// One row per vocabulary entry, in vocabulary order.
struct EmbeddingTable {
  std::vector<std::string> vocab;
  Tensor matrix;
  EmbeddingSource source = EmbeddingSource::structural;

  std::size_t dim() const { return matrix.cols(); }
};

}  // namespace coclust
