#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "coclust/config.hpp"
#include "coclust/error.hpp"
#include "coclust/io.hpp"
#include "coclust/synthetic.hpp"

using namespace coclust;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "coclust_io_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) { return read_text_file(p); }

}  // namespace

TEST(Visits, RoundTrip) {
  fs::path dir = scratch("visits");
  std::vector<VisitRecord> v{{"v1", {"A", "B"}, {1}}, {"v2", {"C"}, {}}};
  write_visits(dir / "v.jsonl", v);
  auto back = read_visits(dir / "v.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].codes, v[0].codes);
  EXPECT_EQ(back[0].labels, v[0].labels);
  EXPECT_TRUE(back[1].labels.empty());
}

TEST(Visits, NullAndMissingLabelsAreUnlabeled) {
  fs::path dir = scratch("visits_null");
  write_text_file(dir / "v.jsonl",
                  "{\"visit_id\":\"a\",\"codes\":[\"X\"],\"labels\":null}\n\n"
                  "{\"visit_id\":\"b\",\"codes\":[\"Y\"]}\n");
  auto v = read_visits(dir / "v.jsonl");
  ASSERT_EQ(v.size(), 2u);
  EXPECT_TRUE(v[0].labels.empty());
  EXPECT_TRUE(v[1].labels.empty());
}

TEST(Visits, MalformedLineIsNamed) {
  fs::path dir = scratch("visits_bad");
  write_text_file(dir / "v.jsonl", "{\"visit_id\":\"a\",\"codes\":[\"X\"]}\n{\"codes\":3}\n");
  try {
    read_visits(dir / "v.jsonl");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
}

TEST(Csv, QuotedFields) {
  EXPECT_EQ(split_csv_line("a,\"b,c\",\"d\"\"e\""),
            (std::vector<std::string>{"a", "b,c", "d\"e"}));
  EXPECT_EQ(split_csv_line(csv_escape("x,\"y\"")), (std::vector<std::string>{"x,\"y\""}));
  EXPECT_THROW(split_csv_line("a,\"b"), DataError);
}

TEST(Descriptions, RoundTripWithHeader) {
  fs::path dir = scratch("desc");
  DescriptionMap d{{"A", "first, with comma"}, {"B", "second \"quoted\""}};
  write_descriptions(dir / "d.csv", d);
  EXPECT_EQ(read_descriptions(dir / "d.csv"), d);
  write_text_file(dir / "plain.csv", "X,hello\n");
  EXPECT_EQ(read_descriptions(dir / "plain.csv").at("X"), "hello");
}

TEST(GroundTruthFile, RoundTrip) {
  fs::path dir = scratch("truth");
  GroundTruth t;
  t.concepts = {{"A", 0}, {"S", -1}};
  t.visits = {{"v1", 2}};
  write_ground_truth(dir / "g.csv", t);
  GroundTruth back = read_ground_truth(dir / "g.csv");
  EXPECT_EQ(back.concepts, t.concepts);
  EXPECT_EQ(back.visits, t.visits);
}

TEST(Config, DefaultsMatchReportedSettings) {
  RunConfig c = parse_run_config("");
  EXPECT_EQ(c.model.layers, 3u);
  EXPECT_EQ(c.model.heads, 4u);
  EXPECT_EQ(c.model.hidden, 48u);
  EXPECT_EQ(c.train.alpha, 10.0);
  EXPECT_EQ(c.train.beta, 0.1);
  EXPECT_EQ(c.train.clusters, 5u);
  EXPECT_EQ(c.train.margin, 1.0);
  EXPECT_EQ(c.train.warmup_epochs, 100u);
  EXPECT_EQ(c.train.split, (std::array<double, 3>{0.7, 0.1, 0.2}));
}

TEST(Config, ParsesAndRoundTrips) {
  RunConfig c = parse_run_config(
      "# comment\nlayers = 2\nlr = 0.0005\nsplit = 0.6, 0.2, 0.2\nclustering = false\n"
      "text_vectors = vec.jsonl\n");
  EXPECT_EQ(c.model.layers, 2u);
  EXPECT_EQ(c.train.learning_rate, 0.0005);
  EXPECT_FALSE(c.train.clustering);
  EXPECT_EQ(c.features.text_vectors, "vec.jsonl");
  RunConfig back = parse_run_config(to_text(c));
  EXPECT_EQ(to_text(back), to_text(c));
  EXPECT_EQ(back.train.split, c.train.split);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_run_config("nonsense = 1\n"), UsageError);
  EXPECT_THROW(parse_run_config("layers = 2\nlayers = 3\n"), UsageError);
  EXPECT_THROW(parse_run_config("layers = two\n"), UsageError);
  EXPECT_THROW(parse_run_config("heads = 5\n"), UsageError);
  EXPECT_THROW(parse_run_config("split = 0.5, 0.5\n"), UsageError);
  EXPECT_THROW(parse_run_config("just a line\n"), UsageError);
}

TEST(SyntheticGen, SpecRoundTrip) {
  SyntheticSpec s;
  s.noise_rate = 0.25;
  s.label_probs = {0.8, 0.3, 0.1};
  EXPECT_EQ(to_text(parse_synthetic_spec(to_text(s))), to_text(s));
  EXPECT_THROW(parse_synthetic_spec("noise_rate = 2\n"), UsageError);
  EXPECT_THROW(parse_synthetic_spec("codes_max = 40\n"), DataError);
}

TEST(SyntheticGen, NoiselessVisitsStayInOnePool) {
  SyntheticSpec s;
  s.noise_rate = 0.0;
  s.shared_concepts = 0;
  s.n_visits = 300;
  SyntheticData d = generate_synthetic(s);
  for (const VisitRecord& v : d.visits) {
    std::set<int> pools;
    for (const auto& c : v.codes) pools.insert(d.truth.concepts.at(c));
    EXPECT_EQ(pools.size(), 1u);
    EXPECT_EQ(*pools.begin(), d.truth.visits.at(v.visit_id));
  }
}

TEST(SyntheticGen, PositiveRatesFollowLabelProbabilities) {
  SyntheticSpec s;
  SyntheticData d = generate_synthetic(s);
  ASSERT_EQ(d.visits.size(), 2000u);
  std::map<int, std::pair<int, int>> counts;
  for (const VisitRecord& v : d.visits) {
    auto& c = counts[d.truth.visits.at(v.visit_id)];
    c.first += v.labels.at(0);
    c.second += 1;
  }
  for (int k = 0; k < 3; ++k) {
    const double rate = static_cast<double>(counts[k].first) / counts[k].second;
    EXPECT_NEAR(rate, s.label_probs[k], 0.05) << "subtype " << k;
  }
}

TEST(SyntheticGen, VisitSizesAndCounts) {
  SyntheticSpec s;
  SyntheticData d = generate_synthetic(s);
  std::set<std::string> codes;
  for (const VisitRecord& v : d.visits) {
    EXPECT_GE(v.codes.size(), s.codes_min);
    EXPECT_LE(v.codes.size(), s.codes_max);
    codes.insert(v.codes.begin(), v.codes.end());
  }
  EXPECT_EQ(d.truth.concepts.size(), s.n_subtypes * s.concepts_per_subtype + s.shared_concepts);
  EXPECT_LE(codes.size(), d.truth.concepts.size());
  EXPECT_EQ(d.descriptions.size(), d.truth.concepts.size());
}

TEST(SyntheticGen, SameSeedByteIdenticalFiles) {
  SyntheticSpec s;
  s.n_visits = 200;
  fs::path a = scratch("syn_a"), b = scratch("syn_b");
  write_synthetic(a, generate_synthetic(s));
  write_synthetic(b, generate_synthetic(s));
  for (const char* f : {"visits.jsonl", "descriptions.csv", "ground_truth.csv"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  s.seed = 8;
  fs::path c = scratch("syn_c");
  write_synthetic(c, generate_synthetic(s));
  EXPECT_NE(slurp(a / "visits.jsonl"), slurp(c / "visits.jsonl"));
}

TEST(SyntheticGen, FilesRebuildTheSameHypergraph) {
  SyntheticSpec s;
  s.n_visits = 150;
  SyntheticData d = generate_synthetic(s);
  fs::path dir = scratch("syn_graph");
  write_synthetic(dir, d);
  Hypergraph direct = Hypergraph::build(d.visits);
  Hypergraph loaded = Hypergraph::build(read_visits(dir / "visits.jsonl"));
  EXPECT_EQ(loaded.edge_count(), s.n_visits);
  EXPECT_EQ(loaded.node_ids(), direct.node_ids());
  EXPECT_EQ(loaded.edge_segments(), direct.edge_segments());
  GroundTruth t = read_ground_truth(dir / "ground_truth.csv");
  EXPECT_EQ(t.visits.size(), s.n_visits);
}
