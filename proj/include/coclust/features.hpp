#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "coclust/embedding_table.hpp"

namespace coclust {

/// Initial node features: structural columns followed by text columns.
struct FeatureTable {
  std::vector<std::string> vocab;
  Tensor matrix;
  std::size_t structural_dim = 0;
  std::size_t text_dim = 0;
};

struct TextLoadResult {
  EmbeddingTable table;
  /// Vocabulary entries filled by hashed_fallback.
  std::size_t fallback_count = 0;
  /// Codes that appeared more than once in the file (last occurrence kept).
  std::size_t duplicate_count = 0;
};

using DescriptionMap = std::map<std::string, std::string>;

/// Reads a JSON Lines vector file ({"code": ..., "vector": [...]}) and aligns
/// it to vocab. Codes missing from the file use hashed_fallback with the
/// file's dimension, or fallback_dim when the file has no vectors. Throws
/// DataError with the line number for malformed lines or mismatched widths.
TextLoadResult load_text_embeddings(const std::filesystem::path& path,
                                    const std::vector<std::string>& vocab,
                                    const DescriptionMap& descriptions, std::size_t fallback_dim);

/// Every row from hashed_fallback.
EmbeddingTable fallback_text_embeddings(const std::vector<std::string>& vocab,
                                        const DescriptionMap& descriptions, std::size_t dim);

/// Unit-norm feature hash of the lowercased character 3-grams of the
/// description (or of the code when the description is empty), with '^' and
/// '$' marking the ends.
std::vector<double> hashed_fallback(const std::string& code, const std::string& description,
                                    std::size_t dim);

/// Row-wise concatenation, structural columns first. Vocabularies must match
/// in order; otherwise DataError lists the symmetric difference.
FeatureTable concat_features(const EmbeddingTable& structural, const EmbeddingTable& textual);

/// Writes a table in the vector-file format read by load_text_embeddings.
void write_vector_file(const std::filesystem::path& path, const EmbeddingTable& table);

}  // namespace coclust
