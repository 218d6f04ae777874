#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "coclust/alignment.hpp"
#include "coclust/clustering.hpp"
#include "coclust/error.hpp"

using namespace coclust;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t = Tensor::matrix(r, c);
  for (double& x : t.storage()) x = n(rng);
  return t;
}

}  // namespace

TEST(KMeans, TwoClusterOptimum) {
  Tensor p = Tensor::matrix(4, 1, {0.0, 0.0, 10.0, 10.0});
  Tensor c = kmeans_init(p, 2, 3);
  std::vector<double> got{c(0, 0), c(1, 0)};
  std::sort(got.begin(), got.end());
  EXPECT_EQ(got, (std::vector<double>{0.0, 10.0}));
}

TEST(KMeans, DistinctPointsBecomeCentroids) {
  Tensor p = Tensor::matrix(3, 2, {0, 0, 5, 1, -3, 7});
  KMeansResult r = kmeans(p, 3, 11);
  EXPECT_EQ(r.inertia, 0.0);
  std::vector<std::size_t> labels = r.labels;
  std::sort(labels.begin(), labels.end());
  EXPECT_EQ(labels, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(KMeans, TooFewDistinctPoints) {
  Tensor p = Tensor::matrix(3, 1, {1.0, 1.0, 2.0});
  EXPECT_THROW(kmeans(p, 3, 1), DataError);
}

TEST(KMeans, DeterministicUnderSeed) {
  std::mt19937_64 rng(4);
  Tensor p = random_matrix(40, 3, rng);
  EXPECT_EQ(kmeans(p, 4, 9).centroids.storage(), kmeans(p, 4, 9).centroids.storage());
  EXPECT_EQ(kmeans_init(p, 4, 9).storage(), kmeans_init(p, 4, 9).storage());
}

TEST(KMeans, RestartsNeverWorse) {
  std::mt19937_64 rng(5);
  Tensor p = random_matrix(60, 2, rng);
  for (std::uint64_t s = 0; s < 5; ++s) {
    EXPECT_LE(kmeans_restarts(p, 5, s, 10).inertia, kmeans(p, 5, s).inertia);
  }
}

TEST(SoftAssign, Examples) {
  Tensor u = Tensor::matrix(2, 2, {0, 0, 2, 0});
  auto q = soft_assign(std::vector<double>{0.0, 0.0}, u);
  EXPECT_NEAR(q[0], 5.0 / 6.0, 1e-15);
  EXPECT_NEAR(q[1], 1.0 / 6.0, 1e-15);
  auto mid = soft_assign(std::vector<double>{1.0, 3.0}, u);
  EXPECT_DOUBLE_EQ(mid[0], 0.5);
  EXPECT_DOUBLE_EQ(mid[1], 0.5);
  Tensor far = Tensor::matrix(2, 2, {0, 0, 1e3, 1e3});
  auto dom = soft_assign(std::vector<double>{0.0, 0.0}, far);
  EXPECT_GT(dom[0], 0.999);
  EXPECT_LT(dom[0], 1.0);
}

TEST(SoftAssign, TapedMatchesPlain) {
  std::mt19937_64 rng(6);
  Tensor x = random_matrix(7, 3, rng), u = random_matrix(4, 3, rng);
  Tensor q = soft_assign(x, u);
  for (std::size_t i = 0; i < 7; ++i) {
    auto row = soft_assign(x.row(i), u);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(q(i, k), row[k], 1e-15);
  }
}

TEST(TargetDistribution, Examples) {
  Tensor q = Tensor::matrix(2, 2, {0.9, 0.1, 0.6, 0.4});
  Tensor p = target_distribution(q);
  // f = (1.5, 0.5); rows of q^2 / f normalized
  const double r0a = 0.81 / 1.5, r0b = 0.01 / 0.5, r1a = 0.36 / 1.5, r1b = 0.16 / 0.5;
  EXPECT_NEAR(p(0, 0), r0a / (r0a + r0b), 1e-15);
  EXPECT_NEAR(p(1, 1), r1b / (r1a + r1b), 1e-15);
  EXPECT_NEAR(p(0, 0), 0.9643, 1e-4);
  EXPECT_NEAR(p(0, 1), 0.0357, 1e-4);
  EXPECT_NEAR(p(1, 0), 0.4286, 1e-4);
  EXPECT_NEAR(p(1, 1), 0.5714, 1e-4);

  Tensor uniform = Tensor::matrix(3, 3, 1.0 / 3.0);
  Tensor pu = target_distribution(uniform);
  for (double v : pu.storage()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);

  Tensor onehot = Tensor::matrix(2, 3, {0, 1, 0, 1, 0, 0});
  EXPECT_EQ(target_distribution(onehot).storage(), onehot.storage());
}

TEST(TargetDistribution, DegenerateRowThrows) {
  Tensor q = Tensor::matrix(2, 2, {1.0, 0.0, 0.0, 0.0});
  EXPECT_THROW(target_distribution(q), NumericalError);
}

TEST(KlLoss, Examples) {
  Tensor q = Tensor::matrix(1, 2, {0.5, 0.5});
  EXPECT_EQ(kl_cluster_loss(q, q), 0.0);
  Tensor p = Tensor::matrix(1, 2, {1.0, 0.0});
  EXPECT_NEAR(kl_cluster_loss(p, q), std::log(2.0), 1e-15);
  Tensor p2 = Tensor::matrix(2, 2, {1.0, 0.0, 1.0, 0.0});
  Tensor q2 = Tensor::matrix(2, 2, 0.5);
  EXPECT_NEAR(kl_cluster_loss(p2, q2, KlReduction::sum), 2.0 * std::log(2.0), 1e-15);
  EXPECT_NEAR(kl_cluster_loss(p2, q2, KlReduction::batch_mean), std::log(2.0), 1e-15);
}

TEST(KlLoss, NonNegativeOnRandomInputs) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor x = random_matrix(6, 3, rng), u = random_matrix(4, 3, rng);
    Tensor q = soft_assign(x, u);
    EXPECT_GE(kl_cluster_loss(target_distribution(q), q), 0.0);
  }
}

TEST(HardAssignments, LowestIndexOnTies) {
  Tensor q = Tensor::matrix(2, 3, {0.4, 0.4, 0.2, 0.1, 0.3, 0.6});
  EXPECT_EQ(hard_assignments(q), (std::vector<std::size_t>{0, 2}));
}

TEST(SoftCentroids, Examples) {
  Tensor x = Tensor::matrix(2, 2, {0, 0, 2, 0});
  Tensor q = Tensor::matrix(2, 2, {0.75, 0.25, 0.25, 0.75});
  Tensor c = soft_centroids(x, q);
  EXPECT_DOUBLE_EQ(c(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(c(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(c(1, 0), 1.5);

  std::mt19937_64 rng(8);
  Tensor pts = random_matrix(5, 3, rng);
  Tensor uniform = Tensor::matrix(5, 2, 0.5);
  Tensor cu = soft_centroids(pts, uniform);
  for (std::size_t j = 0; j < 3; ++j) {
    double mean = 0;
    for (std::size_t i = 0; i < 5; ++i) mean += pts(i, j);
    EXPECT_NEAR(cu(0, j), mean / 5, 1e-14);
    EXPECT_NEAR(cu(1, j), mean / 5, 1e-14);
  }
  Tensor onehot = Tensor::matrix(5, 2, {1, 0, 0, 1, 1, 0, 0, 1, 0, 1});
  Tensor co = soft_centroids(pts, onehot);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_NEAR(co(0, j), (pts(0, j) + pts(2, j)) / 2, 1e-14);
    EXPECT_NEAR(co(1, j), (pts(1, j) + pts(3, j) + pts(4, j)) / 3, 1e-14);
  }
}

TEST(SoftCentroids, EmptyClusterNamesIndex) {
  Tensor x = Tensor::matrix(2, 1, {1, 2});
  Tensor q = Tensor::matrix(2, 2, {1, 0, 1, 0});
  try {
    soft_centroids(x, q);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
}

TEST(NegCosine, Examples) {
  std::vector<double> z{1.0, 2.0}, neg{-1.0, -2.0}, orth{-2.0, 1.0};
  EXPECT_NEAR(neg_cosine(z, z), -1.0, 1e-15);
  EXPECT_NEAR(neg_cosine(z, orth), 0.0, 1e-15);
  EXPECT_NEAR(neg_cosine(z, neg), 1.0, 1e-15);
  EXPECT_THROW(neg_cosine(z, std::vector<double>{0.0, 0.0}), NumericalError);
}

TEST(NegCosine, ScaleInvariant) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> s(0.1, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor a = random_matrix(1, 4, rng), b = random_matrix(1, 4, rng);
    Tensor a2 = a;
    const double k = s(rng);
    for (double& v : a2.storage()) v *= k;
    EXPECT_NEAR(neg_cosine(a.row(0), b.row(0)), neg_cosine(a2.row(0), b.row(0)), 1e-14);
  }
}

TEST(AlignPositive, SelfAndSingleAlignedRow) {
  std::mt19937_64 rng(10);
  Tensor z = random_matrix(5, 4, rng);
  EXPECT_EQ(align_positive(z, z), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  Tensor zv = Tensor::matrix(1, 3, {1, 0, 0});
  Tensor ze = Tensor::matrix(3, 3, {0, 1, 0, 2, 0, 0, 0, 0, 1});
  EXPECT_EQ(align_positive(zv, ze), (std::vector<std::size_t>{1}));
}

TEST(AlignPositive, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor zv = random_matrix(5, 6, rng), ze = random_matrix(5, 6, rng);
    std::vector<std::size_t> got = align_positive(zv, ze);
    for (std::size_t i = 0; i < 5; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < 5; ++j) {
        double ab = 0, aa = 0, bb = 0;
        for (std::size_t c = 0; c < 6; ++c) {
          ab += zv(i, c) * ze(j, c);
          aa += zv(i, c) * zv(i, c);
          bb += ze(j, c) * ze(j, c);
        }
        const double d = -ab / std::sqrt(aa * bb);
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      EXPECT_EQ(got[i], best);
    }
  }
}

TEST(Triplet, OrthonormalRowsGiveZero) {
  Tensor z = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  EXPECT_EQ(triplet_align_loss(z, z, 1.0), 0.0);
}

TEST(Triplet, PositiveEqualsNegativeDirectionGivesMargin) {
  Tensor zv = Tensor::matrix(2, 2, {1, 0, 1, 0});
  Tensor ze = Tensor::matrix(2, 2, {1, 0, 2, 0});
  // every anchor has D_pos = D_neg = -1, so each of the K(K-1) terms is m
  EXPECT_DOUBLE_EQ(triplet_align_loss(zv, ze, 0.7), 0.7);
}

TEST(Triplet, NonNegative) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor zv = random_matrix(4, 3, rng), ze = random_matrix(4, 3, rng);
    EXPECT_GE(triplet_align_loss(zv, ze, 1.0), 0.0);
  }
}

TEST(BatchNorm, EvalModeUsesRunningStatistics) {
  Tensor x = Tensor::matrix(2, 2, {1, 2, 3, 6});
  Tensor gain = Tensor::matrix(1, 2, 1.0), bias = Tensor::matrix(1, 2, 0.0);
  Tensor mean = Tensor::matrix(1, 2, {1.0, 1.0}), var = Tensor::matrix(1, 2, {4.0, 4.0});
  Tape t;
  const Tensor y = t.value(batch_norm(t, t.constant(x), t.constant(gain), t.constant(bias), mean,
                                       var, false, 0.1, 0.0));
  EXPECT_DOUBLE_EQ(y(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(y(1, 1), 2.5);
  EXPECT_EQ(mean(0, 0), 1.0);
}

TEST(BatchNorm, TrainModeUpdatesRunningStatistics) {
  Tensor x = Tensor::matrix(2, 1, {1, 3});
  Tensor gain = Tensor::matrix(1, 1, 1.0), bias = Tensor::matrix(1, 1, 0.0);
  Tensor mean = Tensor::matrix(1, 1, 0.0), var = Tensor::matrix(1, 1, 1.0);
  Tape t;
  const Tensor y = t.value(batch_norm(t, t.constant(x), t.constant(gain), t.constant(bias), mean,
                                       var, true, 0.1, 0.0));
  EXPECT_DOUBLE_EQ(y(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(y(1, 0), 1.0);
  EXPECT_NEAR(mean(0, 0), 0.2, 1e-15);
  // unbiased variance 2
  EXPECT_NEAR(var(0, 0), 0.9 + 0.2, 1e-15);
}

TEST(AlignmentReport, MarginsOfMatchedRows) {
  Tensor z = Tensor::matrix(2, 2, {1, 0, 0, 1});
  auto rows = alignment_report(z, z);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].matched, 0u);
  EXPECT_NEAR(rows[0].distance, -1.0, 1e-15);
  ASSERT_EQ(rows[0].margins.size(), 1u);
  EXPECT_EQ(rows[0].margins[0].first, 1u);
  EXPECT_NEAR(rows[0].margins[0].second, 1.0, 1e-15);
}
