#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "coclust/error.hpp"
#include "coclust/metrics.hpp"
#include "oracles.hpp"

using namespace coclust;

namespace {

std::vector<int> ints(std::initializer_list<int> v) { return v; }

}  // namespace

TEST(Auroc, Examples) {
  EXPECT_EQ(*auroc(std::vector<double>{0.9, 0.8, 0.3, 0.1}, ints({1, 1, 0, 0})), 1.0);
  EXPECT_EQ(*auroc(std::vector<double>{0.1, 0.9, 0.8, 0.3}, ints({1, 1, 0, 0})), 0.5);
  EXPECT_EQ(*auroc(std::vector<double>{0.4, 0.4, 0.4, 0.4}, ints({1, 0, 1, 0})), 0.5);
  EXPECT_FALSE(auroc(std::vector<double>{0.1, 0.2}, ints({1, 1})).has_value());
}

TEST(Aupr, Examples) {
  EXPECT_EQ(*aupr(std::vector<double>{0.9, 0.8, 0.3, 0.1}, ints({1, 1, 0, 0})), 1.0);
  EXPECT_EQ(*aupr(std::vector<double>{0.9, 0.8, 0.3, 0.1}, ints({0, 1, 0, 1})), 0.5);
  for (std::size_t n : {1, 2, 7, 20}) {
    std::vector<double> s(n);
    std::vector<int> y(n, 0);
    for (std::size_t i = 0; i < n; ++i) s[i] = 1.0 - static_cast<double>(i) / n;
    y[n - 1] = 1;
    EXPECT_DOUBLE_EQ(*aupr(s, y), 1.0 / static_cast<double>(n));
  }
  EXPECT_FALSE(aupr(std::vector<double>{0.1}, ints({0})).has_value());
}

TEST(F1Accuracy, Examples) {
  auto y = ints({1, 0, 1, 0});
  EXPECT_EQ(binary_f1(y, y), 1.0);
  EXPECT_EQ(accuracy(y, y), 1.0);
  auto none = ints({0, 0, 0, 0});
  EXPECT_EQ(accuracy(none, y), 0.5);
  EXPECT_EQ(binary_f1(none, y), 0.0);
  EXPECT_EQ(binary_f1(none, none), 0.0);
  // tp 1, fp 1, fn 1 -> 2/4
  EXPECT_DOUBLE_EQ(binary_f1(ints({1, 1, 0, 0}), ints({1, 0, 1, 0})), 0.5);
}

TEST(MacroF1, SingleSlotIsBinaryF1) {
  std::vector<std::vector<int>> p{{1}, {1}, {0}, {0}}, y{{1}, {0}, {1}, {0}};
  EXPECT_DOUBLE_EQ(macro_f1(p, y), binary_f1(ints({1, 1, 0, 0}), ints({1, 0, 1, 0})));
  std::vector<std::vector<int>> p2{{1, 0}, {0, 0}}, y2{{1, 1}, {0, 0}};
  EXPECT_DOUBLE_EQ(macro_f1(p2, y2), 0.5);
}

TEST(Silhouette, Examples) {
  Tensor p = Tensor::matrix(4, 1, {0, 1, 10, 11});
  std::vector<std::size_t> lab{0, 0, 1, 1};
  // outer points: a 1, b 10.5; inner points: a 1, b 9.5
  EXPECT_NEAR(silhouette(p, lab), (9.5 / 10.5 + 8.5 / 9.5) / 2.0, 1e-15);
  Tensor same = Tensor::matrix(4, 2, 3.0);
  EXPECT_EQ(silhouette(same, lab), 0.0);
  std::vector<std::size_t> one{0, 0, 0, 0};
  EXPECT_THROW(silhouette(p, one), UsageError);
}

TEST(Silhouette, RandomAssignmentNearZero) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> c(0, 2);
  Tensor p = Tensor::matrix(200, 2);
  for (double& x : p.storage()) x = n(rng);
  std::vector<std::size_t> lab(200);
  for (auto& l : lab) l = c(rng);
  EXPECT_LT(std::abs(silhouette(p, lab)), 0.1);
}

TEST(Ari, Examples) {
  std::vector<std::size_t> a{0, 0, 1, 1, 2, 2}, relabeled{2, 2, 0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(adjusted_rand_index(a, relabeled), 1.0);
  std::vector<std::size_t> one(6, 0);
  EXPECT_DOUBLE_EQ(adjusted_rand_index(one, one), 1.0);
}

TEST(MetricOracles, RandomInstancesMatchBruteForce) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> len(2, 50);
  std::uniform_int_distribution<int> coarse(0, 5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = len(rng);
    std::vector<double> s(n);
    std::vector<int> y(n);
    // coarse scores force ties
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = trial % 2 ? coarse(rng) / 5.0 : u(rng);
      y[i] = u(rng) < 0.4;
    }
    auto a = auroc(s, y), ao = oracle::auroc_pairs(s, y);
    ASSERT_EQ(a.has_value(), ao.has_value());
    if (a) {
      EXPECT_EQ(*a, *ao);
    }
    auto p = aupr(s, y), po = oracle::aupr_rank_walk(s, y);
    ASSERT_EQ(p.has_value(), po.has_value());
    if (p) {
      EXPECT_NEAR(*p, *po, 1e-15);
    }

    Tensor pts = Tensor::matrix(n, 3);
    for (double& x : pts.storage()) x = u(rng);
    std::vector<std::size_t> lab(n);
    for (std::size_t i = 0; i < n; ++i) lab[i] = i < 2 ? i : coarse(rng) % 3;
    EXPECT_NEAR(silhouette(pts, lab), oracle::silhouette_direct(pts, lab), 1e-12);

    std::vector<std::size_t> other(n);
    for (auto& o : other) o = coarse(rng) % 4;
    EXPECT_NEAR(adjusted_rand_index(lab, other), oracle::ari_pairs(lab, other), 1e-12);
  }
}

TEST(EvalReport, AbsentSlotsAreCounted) {
  Tensor probs = Tensor::matrix(4, 2, {0.9, 0.2, 0.1, 0.3, 0.8, 0.6, 0.3, 0.7});
  Tensor labels = Tensor::matrix(4, 2, {1, 0, 0, 0, 1, 0, 0, 0});
  EvalReport r = evaluate_predictions(probs, labels);
  EXPECT_EQ(r.items, 4u);
  EXPECT_EQ(r.label_slots, 2u);
  EXPECT_EQ(r.auroc_slots, 1u);
  EXPECT_EQ(r.aupr_slots, 1u);
  EXPECT_EQ(r.auroc, 1.0);
  ASSERT_EQ(r.slots.size(), 2u);
  EXPECT_FALSE(r.slots[1].auroc.has_value());
  // predictions at 0.5: slot0 {1,0,1,0} all right, slot1 {0,0,1,1} two wrong
  EXPECT_DOUBLE_EQ(r.accuracy, 6.0 / 8.0);
}

TEST(EvalReport, JsonRoundTrip) {
  Tensor probs = Tensor::matrix(3, 1, {0.9, 0.1, 0.6});
  Tensor labels = Tensor::matrix(3, 1, {1, 0, 0});
  EvalReport r = evaluate_predictions(probs, labels);
  r.silhouette_nodes = 0.25;
  EXPECT_EQ(eval_report_from_json(to_json(r)), r);
}

TEST(EvalReport, SlotCsvHeader) {
  Tensor probs = Tensor::matrix(2, 1, {0.9, 0.1});
  Tensor labels = Tensor::matrix(2, 1, {1, 0});
  auto path = std::filesystem::temp_directory_path() / "coclust_slots.csv";
  write_slot_csv(path, evaluate_predictions(probs, labels));
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "slot,positives,negatives,auroc,aupr,f1,accuracy");
}
