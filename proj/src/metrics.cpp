#include "coclust/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>

#include "coclust/error.hpp"

namespace coclust {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* op) {
  if (a != b) throw UsageError(std::string(op) + ": inputs differ in length");
}

}  // namespace

std::optional<double> auroc(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores.size(), labels.size(), "auroc");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the number of correctly ordered pairs, so ties stay integral.
  std::uint64_t twice_wins = 0, negatives_below = 0, positives = 0, negatives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? pos : neg) += 1;
      ++j;
    }
    twice_wins += 2 * pos * negatives_below + pos * neg;
    negatives_below += neg;
    positives += pos;
    negatives += neg;
    i = j;
  }
  if (positives == 0 || negatives == 0) return std::nullopt;
  return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(positives) *
                                            static_cast<double>(negatives));
}

std::optional<double> aupr(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores.size(), labels.size(), "aupr");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double total = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (labels[order[r]] != 1) continue;
    ++hits;
    total += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  if (hits == 0) return std::nullopt;
  return total / static_cast<double>(hits);
}

double binary_f1(std::span<const int> predictions, std::span<const int> labels) {
  check_lengths(predictions.size(), labels.size(), "f1");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] == 1 && labels[i] == 1) ++tp;
    if (predictions[i] == 1 && labels[i] != 1) ++fp;
    if (predictions[i] != 1 && labels[i] == 1) ++fn;
  }
  if (tp + fp + fn == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  check_lengths(predictions.size(), labels.size(), "accuracy");
  if (labels.empty()) throw UsageError("accuracy: no items");
  std::size_t same = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) same += predictions[i] == labels[i] ? 1 : 0;
  return static_cast<double>(same) / static_cast<double>(labels.size());
}

double macro_f1(const std::vector<std::vector<int>>& predictions,
                const std::vector<std::vector<int>>& labels) {
  check_lengths(predictions.size(), labels.size(), "macro_f1");
  if (labels.empty()) throw UsageError("macro_f1: no items");
  const std::size_t slots = labels[0].size();
  double total = 0.0;
  std::vector<int> p(labels.size()), y(labels.size());
  for (std::size_t s = 0; s < slots; ++s) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      p[i] = predictions[i][s];
      y[i] = labels[i][s];
    }
    total += binary_f1(p, y);
  }
  return total / static_cast<double>(slots);
}

double silhouette(const Tensor& points, std::span<const std::size_t> assignments) {
  const std::size_t n = points.rows();
  check_lengths(n, assignments.size(), "silhouette");
  std::map<std::size_t, std::size_t> sizes;
  for (std::size_t c : assignments) ++sizes[c];
  if (sizes.size() < 2) throw UsageError("silhouette: need at least two populated clusters");
  std::map<std::size_t, double> sums;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& [c, s] : sizes) sums[c] = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double d2 = 0.0;
      for (std::size_t k = 0; k < points.cols(); ++k) {
        const double diff = points(i, k) - points(j, k);
        d2 += diff * diff;
      }
      sums[assignments[j]] += std::sqrt(d2);
    }
    const std::size_t own = assignments[i];
    if (sizes[own] == 1) continue;
    const double a = sums[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (auto& [c, size] : sizes) {
      if (c != own) b = std::min(b, sums[c] / static_cast<double>(size));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  check_lengths(a.size(), b.size(), "adjusted_rand_index");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  std::map<std::pair<std::size_t, std::size_t>, double> joint;
  std::map<std::size_t, double> rows, cols;
  for (std::size_t i = 0; i < n; ++i) {
    joint[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0, row_sum = 0.0, col_sum = 0.0;
  for (auto& [key, count] : joint) index += pairs(count);
  for (auto& [key, count] : rows) row_sum += pairs(count);
  for (auto& [key, count] : cols) col_sum += pairs(count);
  const double expected = row_sum * col_sum / pairs(static_cast<double>(n));
  const double max_index = 0.5 * (row_sum + col_sum);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

EvalReport evaluate_predictions(const Tensor& probs, const Tensor& labels) {
  if (!probs.same_shape(labels)) throw UsageError("evaluate_predictions: shape mismatch");
  const std::size_t n = probs.rows(), w = probs.cols();
  if (n == 0) throw UsageError("evaluate_predictions: no items");
  EvalReport report;
  report.items = n;
  report.label_slots = w;
  std::vector<double> scores(n);
  std::vector<int> y(n), pred(n);
  std::vector<int> all_pred, all_y;
  double f1_total = 0.0, auroc_total = 0.0, aupr_total = 0.0;
  for (std::size_t s = 0; s < w; ++s) {
    SlotMetrics m;
    m.slot = s;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = probs(i, s);
      y[i] = labels(i, s) == 1.0 ? 1 : 0;
      pred[i] = probs(i, s) >= kDecisionThreshold ? 1 : 0;
      (y[i] == 1 ? m.positives : m.negatives) += 1;
    }
    m.auroc = auroc(scores, y);
    m.aupr = aupr(scores, y);
    m.f1 = binary_f1(pred, y);
    m.accuracy = accuracy(pred, y);
    all_pred.insert(all_pred.end(), pred.begin(), pred.end());
    all_y.insert(all_y.end(), y.begin(), y.end());
    f1_total += m.f1;
    if (m.auroc) {
      auroc_total += *m.auroc;
      ++report.auroc_slots;
    }
    if (m.aupr) {
      aupr_total += *m.aupr;
      ++report.aupr_slots;
    }
    report.slots.push_back(m);
  }
  report.accuracy = accuracy(all_pred, all_y);
  report.macro_f1 = f1_total / static_cast<double>(w);
  report.auroc = report.auroc_slots ? auroc_total / static_cast<double>(report.auroc_slots) : 0.0;
  report.aupr = report.aupr_slots ? aupr_total / static_cast<double>(report.aupr_slots) : 0.0;
  return report;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json slots = nlohmann::json::array();
  for (const SlotMetrics& m : r.slots) {
    slots.push_back({{"slot", m.slot},
                     {"positives", m.positives},
                     {"negatives", m.negatives},
                     {"auroc", optional_json(m.auroc)},
                     {"aupr", optional_json(m.aupr)},
                     {"f1", m.f1},
                     {"accuracy", m.accuracy}});
  }
  return {{"accuracy", r.accuracy},
          {"auroc", r.auroc},
          {"aupr", r.aupr},
          {"macro_f1", r.macro_f1},
          {"silhouette_nodes", optional_json(r.silhouette_nodes)},
          {"silhouette_hyperedges", optional_json(r.silhouette_hyperedges)},
          {"counts",
           {{"items", r.items},
            {"label_slots", r.label_slots},
            {"auroc_slots", r.auroc_slots},
            {"aupr_slots", r.aupr_slots}}},
          {"slots", slots}};
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    r.accuracy = j.at("accuracy").get<double>();
    r.auroc = j.at("auroc").get<double>();
    r.aupr = j.at("aupr").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.silhouette_nodes = optional_from(j.at("silhouette_nodes"));
    r.silhouette_hyperedges = optional_from(j.at("silhouette_hyperedges"));
    const auto& counts = j.at("counts");
    r.items = counts.at("items").get<std::size_t>();
    r.label_slots = counts.at("label_slots").get<std::size_t>();
    r.auroc_slots = counts.at("auroc_slots").get<std::size_t>();
    r.aupr_slots = counts.at("aupr_slots").get<std::size_t>();
    for (const auto& s : j.at("slots")) {
      SlotMetrics m;
      m.slot = s.at("slot").get<std::size_t>();
      m.positives = s.at("positives").get<std::size_t>();
      m.negatives = s.at("negatives").get<std::size_t>();
      m.auroc = optional_from(s.at("auroc"));
      m.aupr = optional_from(s.at("aupr"));
      m.f1 = s.at("f1").get<double>();
      m.accuracy = s.at("accuracy").get<double>();
      r.slots.push_back(m);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed evaluation report: ") + e.what());
  }
  return r;
}

void write_slot_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << std::setprecision(17) << "slot,positives,negatives,auroc,aupr,f1,accuracy\n";
  for (const SlotMetrics& m : report.slots) {
    out << m.slot << ',' << m.positives << ',' << m.negatives << ',';
    if (m.auroc) out << *m.auroc;
    out << ',';
    if (m.aupr) out << *m.aupr;
    out << ',' << m.f1 << ',' << m.accuracy << '\n';
  }
}

}  // namespace coclust
