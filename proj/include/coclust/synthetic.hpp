#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "coclust/features.hpp"
#include "coclust/hypergraph.hpp"
#include "coclust/io.hpp"

namespace coclust {

/// Planted-subtype EHR generator. Each subtype owns a pool of
/// concepts_per_subtype concepts, of which marker_concepts are reserved
/// markers; shared concepts belong to no pool.
///
/// A visit picks a subtype uniformly, a size uniformly in
/// [codes_min, codes_max] and a label with probability label_probs[subtype].
/// Each regular code comes from the subtype's non-marker pool, or with
/// probability noise_rate from all non-marker concepts (shared included).
/// Positive visits replace one code with a marker of their own pool, so the
/// label is recoverable from the codes while the positive rate stays at
/// label_probs.
struct SyntheticSpec {
  std::size_t n_subtypes = 3;
  std::size_t concepts_per_subtype = 18;
  std::size_t shared_concepts = 6;
  std::size_t marker_concepts = 3;
  std::size_t n_visits = 2000;
  std::size_t codes_min = 5;
  std::size_t codes_max = 10;
  std::vector<double> label_probs{0.9, 0.4, 0.05};
  double noise_rate = 0.1;
  std::uint64_t seed = 7;

  /// Throws UsageError for invalid counts or probabilities and DataError
  /// when the pools are too small for codes_max.
  void validate() const;
};

/// Same grammar as the run config; keys are the field names, label_probs
/// comma-separated.
SyntheticSpec parse_synthetic_spec(const std::string& text, const std::string& source = "spec");
std::string to_text(const SyntheticSpec& spec);

struct SyntheticData {
  std::vector<VisitRecord> visits;
  DescriptionMap descriptions;
  GroundTruth truth;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);
/// Writes visits.jsonl, descriptions.csv and ground_truth.csv into dir.
void write_synthetic(const std::filesystem::path& dir, const SyntheticData& data);

}  // namespace coclust
