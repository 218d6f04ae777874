#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace coclust {

/// Compressed list of index sets: set s owns indices[offsets[s], offsets[s+1]).
struct Segments {
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> indices;

  std::size_t count() const { return offsets.size() - 1; }
  std::size_t total() const { return indices.size(); }
  std::span<const std::size_t> members(std::size_t s) const {
    return {indices.data() + offsets[s], offsets[s + 1] - offsets[s]};
  }
  void append(std::span<const std::size_t> set) {
    indices.insert(indices.end(), set.begin(), set.end());
    offsets.push_back(indices.size());
  }
  bool operator==(const Segments&) const = default;
};

}  // namespace coclust
