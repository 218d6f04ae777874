#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "coclust/segments.hpp"

namespace coclust {

/// One coded visit. An empty label vector marks an unlabeled visit that only
/// contributes structure.
struct VisitRecord {
  std::string visit_id;
  std::vector<std::string> codes;
  std::vector<int> labels;
};

/// Nodes are concept codes, hyperedges are visits. Immutable after build.
class Hypergraph {
 public:
  /// Vocabulary is the sorted union of codes; repeated codes within a visit
  /// collapse to one membership, keeping first-occurrence order. Throws
  /// DataError naming the visit for an empty code list, and for label widths
  /// that disagree or are not 1 or 25.
  static Hypergraph build(std::span<const VisitRecord> records);

  /// Direct construction from index sets over a given vocabulary. Member
  /// order is kept (after dropping repeats). labels may be empty per edge.
  static Hypergraph from_incidence(std::vector<std::string> node_ids,
                                   std::vector<std::string> edge_ids,
                                   const std::vector<std::vector<std::size_t>>& members,
                                   const std::vector<std::vector<int>>& labels);

  std::size_t node_count() const { return node_ids_.size(); }
  std::size_t edge_count() const { return edge_ids_.size(); }
  std::size_t label_width() const { return label_width_; }

  const std::vector<std::string>& node_ids() const { return node_ids_; }
  const std::vector<std::string>& edge_ids() const { return edge_ids_; }
  std::optional<std::size_t> node_index(const std::string& code) const;

  std::span<const std::size_t> members(std::size_t edge) const { return edges_.members(edge); }
  std::span<const std::size_t> incident(std::size_t node) const {
    return node_to_edges_.members(node);
  }
  const Segments& edge_segments() const { return edges_; }
  const Segments& node_segments() const { return node_to_edges_; }

  bool is_labeled(std::size_t edge) const { return labeled_[edge] != 0; }
  /// Label slots of a labeled edge (label_width entries).
  std::span<const std::uint8_t> labels(std::size_t edge) const {
    return {labels_.data() + edge * label_width_, label_width_};
  }
  std::vector<std::size_t> labeled_edges() const;

  /// Rebuilds the node-to-edge incidence from the edge lists.
  static Segments transpose(const Segments& edges, std::size_t node_count);

 private:
  std::vector<std::string> node_ids_;
  std::unordered_map<std::string, std::size_t> node_lookup_;
  std::vector<std::string> edge_ids_;
  Segments edges_;
  Segments node_to_edges_;
  std::vector<std::uint8_t> labels_;
  std::vector<std::uint8_t> labeled_;
  std::size_t label_width_ = 1;
};

/// Node sequences produced by node -> hyperedge -> node walks.
struct WalkCorpus {
  std::vector<std::vector<std::size_t>> walks;
  std::size_t walk_length = 0;
  std::size_t walks_per_node = 0;
  std::uint64_t seed = 0;
};

/// walks_per_node walks from every node in node order. Each step picks a
/// uniform incident hyperedge and then a uniform member of it (the current
/// node included). A node without hyperedges repeats itself. Each walk draws
/// from its own generator seeded by (seed, start node, walk index), so the
/// result does not depend on generation order.
WalkCorpus random_walks(const Hypergraph& g, std::size_t walk_length, std::size_t walks_per_node,
                        std::uint64_t seed);

/// splitmix64 finalizer, used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace coclust
