#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "coclust/tensor.hpp"

namespace coclust {

/// Probability that a random positive outranks a random negative, ties
/// counting one half. Absent when either class is missing.
std::optional<double> auroc(std::span<const double> scores, std::span<const int> labels);

/// Average precision: mean over positives of the precision at their rank,
/// ranking by descending score with ties broken by original index. Absent
/// without positives.
std::optional<double> aupr(std::span<const double> scores, std::span<const int> labels);

/// Positive-class F1; 0 when there are neither predicted nor true positives.
double binary_f1(std::span<const int> predictions, std::span<const int> labels);
/// Fraction of matching entries.
double accuracy(std::span<const int> predictions, std::span<const int> labels);
/// Unweighted mean over label slots (columns) of the positive-class F1.
double macro_f1(const std::vector<std::vector<int>>& predictions,
                const std::vector<std::vector<int>>& labels);

/// Mean silhouette with Euclidean distances, computed exactly in O(n^2).
/// Singleton clusters give s(i) = 0, as does max(a, b) = 0. Throws
/// UsageError unless at least two clusters are populated.
double silhouette(const Tensor& points, std::span<const std::size_t> assignments);

/// Chance-corrected Rand index between two partitions of the same items.
double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b);

struct SlotMetrics {
  std::size_t slot = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::optional<double> auroc;
  std::optional<double> aupr;
  double f1 = 0.0;
  double accuracy = 0.0;

  bool operator==(const SlotMetrics&) const = default;
};

/// Prediction metrics averaged over label slots (absent slots excluded and
/// counted), plus per-domain silhouettes when available.
struct EvalReport {
  double accuracy = 0.0;
  double auroc = 0.0;
  double aupr = 0.0;
  double macro_f1 = 0.0;
  std::optional<double> silhouette_nodes;
  std::optional<double> silhouette_hyperedges;
  std::size_t items = 0;
  std::size_t label_slots = 0;
  std::size_t auroc_slots = 0;
  std::size_t aupr_slots = 0;
  std::vector<SlotMetrics> slots;

  bool operator==(const EvalReport&) const = default;
};

inline constexpr double kDecisionThreshold = 0.5;

/// probs and labels are items x slots; predictions threshold probs at 0.5.
EvalReport evaluate_predictions(const Tensor& probs, const Tensor& labels);

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);
/// CSV: slot,positives,negatives,auroc,aupr,f1,accuracy (empty cell when absent).
void write_slot_csv(const std::filesystem::path& path, const EvalReport& report);

}  // namespace coclust
