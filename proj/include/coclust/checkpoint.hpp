#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "coclust/config.hpp"
#include "coclust/tensor.hpp"
#include "coclust/trainer.hpp"

namespace coclust {

/// Binary layout, native byte order (little-endian on supported hosts):
///   "CCKP" u32 version
///   u64 length, config text
///   u64 tensor count, then per tensor:
///     u64 length, name; u64 rank; u64 extent x rank; f64 x size
/// Values are stored as raw doubles, so a round trip is bit-exact.
struct Checkpoint {
  std::string config;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& at(const std::string& name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// Throws DataError for a truncated file, wrong magic or unknown version.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Model parameters, buffers, the input features and the epoch.
Checkpoint pack_model(const RunConfig& config, CoClusterModel& model, const Tensor& features,
                      std::size_t epoch);

struct LoadedModel {
  RunConfig config;
  CoClusterModel model;
  Tensor features;
  std::size_t epoch = 0;
};

/// Throws DataError when a tensor is missing or has the wrong shape.
LoadedModel unpack_model(const Checkpoint& checkpoint);

}  // namespace coclust
