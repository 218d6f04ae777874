#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "coclust/trainer.hpp"
#include "coclust/transformer.hpp"

namespace coclust {

/// Flat "key = value" text. '#' starts a comment, blank lines are ignored,
/// keys may appear once. Parsed values are consumed by key; any key left
/// unconsumed at finish() is an error.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text, const std::string& source);

  bool take(const std::string& key, std::string& out);
  bool take(const std::string& key, double& out);
  bool take(const std::string& key, std::size_t& out);
  bool take(const std::string& key, bool& out);
  /// Comma-separated numbers.
  bool take(const std::string& key, std::vector<double>& out);
  void finish() const;

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };
  [[noreturn]] void bad(const std::string& key, const std::string& what) const;
  std::string source_;
  std::map<std::string, Entry> entries_;
};

/// Node feature construction settings.
struct FeatureConfig {
  std::size_t structural_dim = 128;
  std::size_t walk_length = 40;
  std::size_t walks_per_node = 10;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t skipgram_epochs = 5;
  double skipgram_lr = 0.025;
  /// Width of the hashed fallback when no vector file is available.
  std::size_t text_dim = 768;
  /// false replaces the text columns by zeros.
  bool text_features = true;
  /// Vector file, relative paths resolved against the data directory. Empty
  /// means text_vectors.jsonl in the data directory when present.
  std::string text_vectors;
};

struct RunConfig {
  TransformerConfig model;
  TrainConfig train;
  FeatureConfig features;
};

/// Keys (defaults in parentheses):
///   layers (3) heads (4) hidden (48) ffn_hidden (48) head_hidden (48)
///   dropout (0) input_dim (0 = derived from features)
///   label_width (0 = derived from data)
///   alpha (10) beta (0.1) clusters (5) margin (1) lr (0.001) epochs (200)
///   warmup_epochs (100) seed (1) split (0.7,0.1,0.2) batch_size (0)
///   cluster_layer (0 = last) projection_dim (48) clustering (true)
///   structural_dim (128) walk_length (40) walks_per_node (10) window (5)
///   negatives (5) skipgram_epochs (5) skipgram_lr (0.025) text_dim (768)
///   text_features (true) text_vectors ("")
RunConfig parse_run_config(const std::string& text, const std::string& source = "config");
RunConfig load_run_config(const std::filesystem::path& path);
/// Every key, in a form parse_run_config reads back exactly.
std::string to_text(const RunConfig& config);

}  // namespace coclust
