#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "coclust/checkpoint.hpp"
#include "coclust/error.hpp"
#include "coclust/synthetic.hpp"
#include "coclust/trainer.hpp"

using namespace coclust;

namespace {

struct Small {
  Hypergraph graph;
  Tensor features;
  TransformerConfig model;
  TrainConfig train;
};

Small small_problem() {
  SyntheticSpec spec;
  spec.concepts_per_subtype = 8;
  spec.shared_concepts = 2;
  spec.marker_concepts = 2;
  spec.n_visits = 120;
  spec.codes_min = 3;
  spec.codes_max = 5;
  spec.seed = 3;
  SyntheticData data = generate_synthetic(spec);
  Small s;
  s.graph = Hypergraph::build(data.visits);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  s.features = Tensor::matrix(s.graph.node_count(), 6);
  for (double& x : s.features.storage()) x = n(rng);
  s.model.layers = 2;
  s.model.heads = 2;
  s.model.hidden = 8;
  s.model.ffn_hidden = 8;
  s.model.head_hidden = 8;
  s.model.input_dim = 6;
  s.model.label_width = 1;
  s.train.clusters = 3;
  s.train.epochs = 8;
  s.train.warmup_epochs = 4;
  s.train.projection_dim = 4;
  s.train.learning_rate = 5e-3;
  return s;
}

std::vector<double> flatten(CoClusterModel& m) {
  std::vector<double> out;
  for (const NamedTensor& p : m.named_parameters())
    out.insert(out.end(), p.tensor->storage().begin(), p.tensor->storage().end());
  return out;
}

}  // namespace

TEST(TotalLoss, Examples) {
  EXPECT_DOUBLE_EQ(total_loss(0.7, 0.02, 0.03, 0.5, 10.0, 0.1), 0.7 + 10.0 * 0.05 + 0.05);
  EXPECT_NEAR(total_loss(0.7, 0.02, 0.03, 0.5, 10.0, 0.1), 1.25, 1e-15);
  EXPECT_EQ(total_loss(0.7, 0.02, 0.03, 0.5, 0.0, 0.0), 0.7);
}

TEST(Split, TenItemsSevenOneTwo) {
  std::vector<std::size_t> items(10);
  for (std::size_t i = 0; i < 10; ++i) items[i] = i;
  SplitIndex s = split_items(items, {0.7, 0.1, 0.2}, 4);
  EXPECT_EQ(s.train.size(), 7u);
  EXPECT_EQ(s.validation.size(), 1u);
  EXPECT_EQ(s.test.size(), 2u);
}

TEST(Split, PartitionAndDeterminism) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + rng() % 200;
    std::vector<std::size_t> items(n);
    for (std::size_t i = 0; i < n; ++i) items[i] = i * 3 + 1;
    SplitIndex a = split_items(items, {0.7, 0.1, 0.2}, trial);
    SplitIndex b = split_items(items, {0.7, 0.1, 0.2}, trial);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
    std::multiset<std::size_t> all(a.train.begin(), a.train.end());
    all.insert(a.validation.begin(), a.validation.end());
    all.insert(a.test.begin(), a.test.end());
    EXPECT_EQ(all, std::multiset<std::size_t>(items.begin(), items.end()));
  }
}

TEST(Split, TooFewItems) {
  EXPECT_THROW(split_items({1, 2}, {0.7, 0.1, 0.2}, 1), DataError);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.clusters = 1;
  EXPECT_THROW(c.validate(), UsageError);
  c = TrainConfig{};
  c.warmup_epochs = c.epochs + 1;
  EXPECT_THROW(c.validate(), UsageError);
}

TEST(Train, SameSeedSameTrajectory) {
  Small s = small_problem();
  TrainResult a = train(s.graph, s.features, CoClusterModel::init(s.model, s.train), s.train);
  TrainResult b = train(s.graph, s.features, CoClusterModel::init(s.model, s.train), s.train);
  ASSERT_EQ(a.history.size(), 8u);
  for (std::size_t e = 0; e < 8; ++e) {
    EXPECT_EQ(a.history[e].total, b.history[e].total);
    EXPECT_EQ(a.history[e].val_auroc, b.history[e].val_auroc);
  }
  EXPECT_EQ(flatten(a.last), flatten(b.last));
  EXPECT_EQ(a.best_epoch, b.best_epoch);
}

TEST(Train, PhasesAndTotals) {
  Small s = small_problem();
  TrainResult r = train(s.graph, s.features, CoClusterModel::init(s.model, s.train), s.train);
  for (const EpochRecord& e : r.history) {
    EXPECT_EQ(e.phase, e.epoch <= 4 ? 1 : 2);
    if (e.phase == 1) {
      EXPECT_EQ(e.node_kl, 0.0);
      EXPECT_EQ(e.total, e.cls);
    } else {
      EXPECT_NEAR(e.total, total_loss(e.cls, e.node_kl, e.edge_kl, e.align, 10.0, 0.1), 1e-12);
      EXPECT_GE(e.node_kl, 0.0);
      EXPECT_GE(e.align, 0.0);
    }
  }
  EXPECT_TRUE(r.last.clusters_ready);
  EXPECT_GT(r.best_epoch, 4u);
}

TEST(Train, ZeroWeightsMatchBackboneRun) {
  Small s = small_problem();
  TrainConfig joint = s.train;
  joint.alpha = 0.0;
  joint.beta = 0.0;
  TrainConfig plain = s.train;
  plain.clustering = false;
  TrainResult a = train(s.graph, s.features, CoClusterModel::init(s.model, joint), joint);
  TrainResult b = train(s.graph, s.features, CoClusterModel::init(s.model, plain), plain);
  for (std::size_t e = 0; e < a.history.size(); ++e) EXPECT_EQ(a.history[e].cls, b.history[e].cls);
  auto pa = a.last.backbone.named_parameters(), pb = b.last.backbone.named_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    EXPECT_EQ(pa[i].tensor->storage(), pb[i].tensor->storage()) << pa[i].name;
}

TEST(Train, MiniBatchesRun) {
  Small s = small_problem();
  s.train.batch_size = 16;
  TrainResult r = train(s.graph, s.features, CoClusterModel::init(s.model, s.train), s.train);
  for (const EpochRecord& e : r.history) EXPECT_TRUE(std::isfinite(e.total));
}

TEST(Train, LabelWidthMismatch) {
  Small s = small_problem();
  s.model.label_width = 25;
  EXPECT_THROW(train(s.graph, s.features, CoClusterModel::init(s.model, s.train), s.train),
               UsageError);
}

TEST(Train, DivergenceNamesEpochAndComponent) {
  Small s = small_problem();
  s.features(0, 0) = std::nan("");
  try {
    train(s.graph, s.features, CoClusterModel::init(s.model, s.train), s.train);
    FAIL();
  } catch (const NumericalError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("epoch 1"), std::string::npos) << m;
  }
}

TEST(Infer, ClusterStateRowsAreDistributions) {
  Small s = small_problem();
  TrainResult r = train(s.graph, s.features, CoClusterModel::init(s.model, s.train), s.train);
  Inference inf = infer(r.last, s.graph, s.features);
  ASSERT_TRUE(inf.nodes && inf.edges);
  for (const ClusterState* st : {&*inf.nodes, &*inf.edges}) {
    for (std::size_t i = 0; i < st->assignments.rows(); ++i) {
      double q = 0, p = 0;
      for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_GE(st->assignments(i, k), 0.0);
        q += st->assignments(i, k);
        p += st->target(i, k);
      }
      EXPECT_NEAR(q, 1.0, 1e-9);
      EXPECT_NEAR(p, 1.0, 1e-9);
    }
  }
  EXPECT_EQ(inf.node_projection.rows(), 3u);
  EXPECT_EQ(inf.node_projection.cols(), 4u);
}

TEST(KlTrend, CountsRisingWindows) {
  std::vector<EpochRecord> h;
  for (std::size_t e = 1; e <= 12; ++e) {
    EpochRecord r;
    r.epoch = e;
    r.phase = e > 2 ? 2 : 1;
    r.node_kl_at_refresh = 1.0 / static_cast<double>(e);
    r.edge_kl_at_refresh = 1.0 / static_cast<double>(e);
    h.push_back(r);
  }
  EXPECT_EQ(kl_trend_violations(h, 5), 0u);
  h[10].node_kl_at_refresh = 5.0;
  EXPECT_GT(kl_trend_violations(h, 5), 0u);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Small s = small_problem();
  TrainResult r = train(s.graph, s.features, CoClusterModel::init(s.model, s.train), s.train);
  RunConfig cfg;
  cfg.model = s.model;
  cfg.train = s.train;
  auto path = std::filesystem::temp_directory_path() / "coclust_roundtrip.ckpt";
  save_checkpoint(path, pack_model(cfg, r.best, s.features, r.best_epoch));
  LoadedModel back = unpack_model(load_checkpoint(path));
  EXPECT_EQ(flatten(back.model), flatten(r.best));
  EXPECT_EQ(back.features.storage(), s.features.storage());
  EXPECT_EQ(back.epoch, r.best_epoch);
  EXPECT_EQ(back.model.clusters_ready, r.best.clusters_ready);
  auto nb = back.model.named_buffers(), rb = r.best.named_buffers();
  for (std::size_t i = 0; i < nb.size(); ++i) EXPECT_EQ(nb[i].tensor->storage(), rb[i].tensor->storage());

  Inference a = infer(r.best, s.graph, s.features), b = infer(back.model, s.graph, s.features);
  EXPECT_EQ(a.probs.storage(), b.probs.storage());
  EXPECT_EQ(mean_auroc(b.probs, s.graph, r.split.validation),
            r.history[r.best_epoch - 1].val_auroc);
}

TEST(Checkpoint, CorruptFilesRejected) {
  auto path = std::filesystem::temp_directory_path() / "coclust_bad.ckpt";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE";
  }
  EXPECT_THROW(load_checkpoint(path), DataError);
  Checkpoint c;
  c.config = "layers = 1\n";
  c.tensors.push_back({"x", Tensor::matrix(2, 2, 1.5)});
  save_checkpoint(path, c);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  EXPECT_THROW(load_checkpoint(path), DataError);
}
