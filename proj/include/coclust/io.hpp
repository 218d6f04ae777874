#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "coclust/features.hpp"
#include "coclust/hypergraph.hpp"

namespace coclust {

/// Visits file: one JSON object per line,
/// {"visit_id": string, "codes": [string], "labels": [0/1, ...]}.
/// A missing, null or empty "labels" marks the visit unlabeled. Blank lines
/// are skipped. Throws DataError naming the line.
std::vector<VisitRecord> read_visits(const std::filesystem::path& path);
void write_visits(const std::filesystem::path& path, const std::vector<VisitRecord>& visits);

/// Two-column CSV (code, description) with optional "code,description"
/// header; fields may be double-quoted with "" escapes.
DescriptionMap read_descriptions(const std::filesystem::path& path);
void write_descriptions(const std::filesystem::path& path, const DescriptionMap& descriptions);

/// Splits one CSV record. Throws DataError on an unterminated quote.
std::vector<std::string> split_csv_line(const std::string& line);
std::string csv_escape(const std::string& field);

/// Planted membership: subtype per concept (-1 for shared concepts) and per
/// visit.
struct GroundTruth {
  std::map<std::string, int> concepts;
  std::map<std::string, int> visits;
};

/// CSV: kind,id,subtype with kind "concept" or "visit".
GroundTruth read_ground_truth(const std::filesystem::path& path);
void write_ground_truth(const std::filesystem::path& path, const GroundTruth& truth);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace coclust
