#include "coclust/hypergraph.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "coclust/error.hpp"

namespace coclust {

namespace {

std::size_t check_label_width(std::size_t width, const std::string& where) {
  if (width != 1 && width != 25) {
    throw DataError(where + ": label width " + std::to_string(width) + " must be 1 or 25");
  }
  return width;
}

}  // namespace

Hypergraph Hypergraph::build(std::span<const VisitRecord> records) {
  std::set<std::string> vocab;
  for (const VisitRecord& r : records) {
    if (r.codes.empty()) throw DataError("visit '" + r.visit_id + "' has no codes");
    vocab.insert(r.codes.begin(), r.codes.end());
  }
  std::vector<std::string> node_ids(vocab.begin(), vocab.end());
  std::unordered_map<std::string, std::size_t> lookup;
  for (std::size_t i = 0; i < node_ids.size(); ++i) lookup.emplace(node_ids[i], i);

  std::vector<std::string> edge_ids;
  std::vector<std::vector<std::size_t>> members;
  std::vector<std::vector<int>> labels;
  edge_ids.reserve(records.size());
  members.reserve(records.size());
  labels.reserve(records.size());
  for (const VisitRecord& r : records) {
    edge_ids.push_back(r.visit_id);
    std::vector<std::size_t> m;
    m.reserve(r.codes.size());
    for (const std::string& c : r.codes) m.push_back(lookup.at(c));
    members.push_back(std::move(m));
    labels.push_back(r.labels);
  }
  return from_incidence(std::move(node_ids), std::move(edge_ids), members, labels);
}

Hypergraph Hypergraph::from_incidence(std::vector<std::string> node_ids,
                                      std::vector<std::string> edge_ids,
                                      const std::vector<std::vector<std::size_t>>& members,
                                      const std::vector<std::vector<int>>& labels) {
  if (edge_ids.size() != members.size() || labels.size() != members.size()) {
    throw DataError("hypergraph: edge ids, member lists and labels differ in length");
  }
  Hypergraph g;
  g.node_ids_ = std::move(node_ids);
  for (std::size_t i = 0; i < g.node_ids_.size(); ++i) {
    if (!g.node_lookup_.emplace(g.node_ids_[i], i).second) {
      throw DataError("hypergraph: duplicate node id '" + g.node_ids_[i] + "'");
    }
  }
  g.edge_ids_ = std::move(edge_ids);

  std::optional<std::size_t> width;
  for (std::size_t e = 0; e < labels.size(); ++e) {
    if (labels[e].empty()) continue;
    if (!width) {
      width = check_label_width(labels[e].size(), "visit '" + g.edge_ids_[e] + "'");
    } else if (labels[e].size() != *width) {
      throw DataError("visit '" + g.edge_ids_[e] + "' has " + std::to_string(labels[e].size()) +
                      " labels, expected " + std::to_string(*width));
    }
  }
  g.label_width_ = width.value_or(1);

  std::vector<std::size_t> unique;
  for (std::size_t e = 0; e < members.size(); ++e) {
    if (members[e].empty()) throw DataError("visit '" + g.edge_ids_[e] + "' has no codes");
    unique.clear();
    for (std::size_t v : members[e]) {
      if (v >= g.node_ids_.size()) {
        throw DataError("visit '" + g.edge_ids_[e] + "' references node index out of range");
      }
      if (std::find(unique.begin(), unique.end(), v) == unique.end()) unique.push_back(v);
    }
    g.edges_.append(unique);

    g.labeled_.push_back(labels[e].empty() ? 0 : 1);
    for (std::size_t k = 0; k < g.label_width_; ++k) {
      int y = labels[e].empty() ? 0 : labels[e][k];
      if (y != 0 && y != 1) {
        throw DataError("visit '" + g.edge_ids_[e] + "' has non-binary label " +
                        std::to_string(y));
      }
      g.labels_.push_back(static_cast<std::uint8_t>(y));
    }
  }
  g.node_to_edges_ = transpose(g.edges_, g.node_ids_.size());
  return g;
}

std::optional<std::size_t> Hypergraph::node_index(const std::string& code) const {
  auto it = node_lookup_.find(code);
  if (it == node_lookup_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> Hypergraph::labeled_edges() const {
  std::vector<std::size_t> out;
  for (std::size_t e = 0; e < edge_count(); ++e) {
    if (is_labeled(e)) out.push_back(e);
  }
  return out;
}

Segments Hypergraph::transpose(const Segments& edges, std::size_t node_count) {
  std::vector<std::size_t> degree(node_count, 0);
  for (std::size_t v : edges.indices) ++degree[v];
  Segments out;
  out.offsets.assign(node_count + 1, 0);
  for (std::size_t v = 0; v < node_count; ++v) out.offsets[v + 1] = out.offsets[v] + degree[v];
  out.indices.assign(edges.total(), 0);
  std::vector<std::size_t> cursor(out.offsets.begin(), out.offsets.end() - 1);
  for (std::size_t e = 0; e < edges.count(); ++e) {
    for (std::size_t v : edges.members(e)) out.indices[cursor[v]++] = e;
  }
  return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ b);
}

WalkCorpus random_walks(const Hypergraph& g, std::size_t walk_length, std::size_t walks_per_node,
                        std::uint64_t seed) {
  if (walk_length < 2) throw UsageError("random_walks: walk length must be at least 2");
  if (g.node_count() == 0) throw UsageError("random_walks: graph has no nodes");
  WalkCorpus corpus;
  corpus.walk_length = walk_length;
  corpus.walks_per_node = walks_per_node;
  corpus.seed = seed;
  corpus.walks.reserve(g.node_count() * walks_per_node);
  for (std::size_t start = 0; start < g.node_count(); ++start) {
    for (std::size_t w = 0; w < walks_per_node; ++w) {
      std::mt19937_64 rng(mix_seed(seed, start, w));
      std::vector<std::size_t> walk;
      walk.reserve(walk_length);
      walk.push_back(start);
      std::size_t current = start;
      while (walk.size() < walk_length) {
        auto edges = g.incident(current);
        if (!edges.empty()) {
          std::uniform_int_distribution<std::size_t> pick_edge(0, edges.size() - 1);
          auto nodes = g.members(edges[pick_edge(rng)]);
          std::uniform_int_distribution<std::size_t> pick_node(0, nodes.size() - 1);
          current = nodes[pick_node(rng)];
        }
        walk.push_back(current);
      }
      corpus.walks.push_back(std::move(walk));
    }
  }
  return corpus;
}

}  // namespace coclust
