#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "ghnet/data.hpp"
#include "ghnet/errors.hpp"
#include "test_util.hpp"

using namespace ghnet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ghnet_data_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void put(const fs::path& file, const std::string& text) {
  std::ofstream(file) << text;
}

// Path graph 0-1-2, two classes.
fs::path write_fixture(const std::string& name) {
  const fs::path dir = scratch(name);
  put(dir / "meta.json", R"({"name": "tiny", "num_nodes": 3, "num_features": 2, "num_classes": 2})");
  put(dir / "edges.tsv", "0\t1\n1\t2\n");
  put(dir / "features.tsv", "1\t0\n0\t1\n0.5\t0.25\n");
  put(dir / "labels.tsv", "0\n1\n1\n");
  put(dir / "split.json", R"({"train": [0], "val": [1], "test": [2]})");
  return dir;
}

void expect_data_error(const fs::path& dir, const std::string& fragment) {
  try {
    load_graphdir(dir);
    FAIL("expected DataError mentioning " << fragment);
  } catch (const DataError& e) {
    INFO(e.what());
    CHECK(std::string(e.what()).find(fragment) != std::string::npos);
  }
}

GraphDataset small_sbm(std::uint64_t seed) {
  SbmParams p;
  p.blocks = 3;
  p.nodes_per_block = 20;
  p.p_in = 0.3;
  p.p_out = 0.02;
  p.feat_dim = 5;
  Rng rng(seed);
  return synth_sbm(p, rng);
}

}  // namespace

TEST_CASE("empty splits are rejected") {
  const fs::path dir = write_fixture("empty_test");
  put(dir / "split.json", R"({"train": [0], "val": [1], "test": []})");
  expect_data_error(dir, "'test' is empty");
}

TEST_CASE("loading a three-node GraphDir") {
  const fs::path dir = write_fixture("tiny");
  put(dir / "split.json", R"({"train": [0], "val": [1], "test": [1]})");
  expect_data_error(dir, "overlapping splits (node 1");

  put(dir / "split.json", R"({"train": [0], "val": [1], "test": [2]})");
  const GraphDataset ds = load_graphdir(dir);
  CHECK(ds.name == "tiny");
  CHECK(ds.num_nodes() == 3);
  CHECK(ds.num_features() == 2);
  CHECK(ds.num_classes == 2);
  CHECK(ds.num_edges() == 2);
  CHECK(ds.adjacency.at(1, 0) == 1.0);
  CHECK(ds.adjacency.at(2, 1) == 1.0);
  CHECK(ds.adjacency.at(0, 2) == 0.0);
  CHECK(ds.features == DenseMatrix(3, 2, {1, 0, 0, 1, 0.5, 0.25}));
  CHECK(ds.labels == std::vector<int>{0, 1, 1});
  CHECK(ds.splits.train == std::vector<std::size_t>{0});
  CHECK(ds.splits.test == std::vector<std::size_t>{2});
}

TEST_CASE("unlabeled nodes outside the splits are allowed") {
  const fs::path dir = write_fixture("unlabeled");
  put(dir / "meta.json", R"({"name": "tiny", "num_nodes": 4, "num_features": 2, "num_classes": 2})");
  put(dir / "features.tsv", "1\t0\n0\t1\n0.5\t0.25\n0\t0\n");
  put(dir / "labels.tsv", "0\n1\n1\n-1\n");
  put(dir / "split.json", R"({"train": [0], "val": [1], "test": [2]})");
  CHECK(load_graphdir(dir).labels[3] == kUnlabeled);

  put(dir / "split.json", R"({"train": [0], "val": [1], "test": [2, 3]})");
  expect_data_error(dir, "labels.tsv: node 3");
}

TEST_CASE("loader error paths name the file") {
  CHECK_THROWS_AS(load_graphdir(fs::temp_directory_path() / "ghnet_no_such_dir"), DataError);

  fs::path dir = write_fixture("missing");
  fs::remove(dir / "edges.tsv");
  expect_data_error(dir, "edges.tsv");

  dir = write_fixture("count");
  put(dir / "features.tsv", "1\t0\n0\t1\n");
  expect_data_error(dir, "features.tsv");

  dir = write_fixture("width");
  put(dir / "features.tsv", "1\t0\n0\t1\t3\n0.5\t0.25\n");
  expect_data_error(dir, "features.tsv: line 2");

  dir = write_fixture("range");
  put(dir / "labels.tsv", "0\n2\n1\n");
  put(dir / "split.json", R"({"train": [0], "val": [1], "test": [2]})");
  expect_data_error(dir, "labels.tsv: label 2");

  dir = write_fixture("edge");
  put(dir / "edges.tsv", "0\t1\n1\t3\n");
  expect_data_error(dir, "edges.tsv: line 2");

  dir = write_fixture("meta");
  put(dir / "meta.json", R"({"name": "tiny"})");
  expect_data_error(dir, "meta.json");

  dir = write_fixture("split");
  put(dir / "split.json", R"({"train": [0], "val": [1]})");
  expect_data_error(dir, "split.json");
}

TEST_CASE("write then load reproduces the dataset exactly") {
  for (std::uint64_t seed : {1, 2, 3}) {
    GraphDataset ds = small_sbm(seed);
    // Awkward reals must survive the text round trip bit for bit.
    ds.features(0, 0) = 0.1 + 0.2;
    ds.features(1, 1) = 1e-300;
    ds.features(2, 2) = -123456.789e10;
    const fs::path dir = scratch("roundtrip_" + std::to_string(seed));
    write_graphdir(ds, dir);
    CHECK(load_graphdir(dir) == ds);
  }
}

TEST_CASE("SBM structure") {
  SbmParams p;
  p.blocks = 3;
  p.nodes_per_block = 30;
  p.p_in = 0.4;
  p.p_out = 0.0;
  p.feat_dim = 4;
  p.feat_noise = 0.0;
  Rng rng(5);
  const GraphDataset ds = synth_sbm(p, rng);
  CHECK(ds.num_nodes() == 90);
  CHECK(ds.num_classes == 3);
  for (std::size_t r = 0; r < 90; ++r) {
    CHECK(ds.labels[r] == static_cast<int>(r / 30));
    for (std::size_t c : ds.adjacency.row_cols(r)) CHECK(c / 30 == r / 30);
    for (std::size_t f = 0; f < 4; ++f)
      CHECK(ds.features(r, f) == (f == r / 30 ? 1.0 : 0.0));
  }
  CHECK(ds.num_edges() > 0);

  // 10% / 20% / 70% of each block.
  CHECK(ds.splits.train.size() == 9);
  CHECK(ds.splits.val.size() == 18);
  CHECK(ds.splits.test.size() == 63);
  std::vector<int> per_block(3, 0);
  for (std::size_t id : ds.splits.train) ++per_block[id / 30];
  CHECK(per_block == std::vector<int>{3, 3, 3});
}

TEST_CASE("SBM edge density tracks p_in and p_out") {
  SbmParams p;
  Rng rng(0);
  const GraphDataset ds = synth_sbm(p, rng);
  std::size_t inside = 0;
  std::size_t across = 0;
  for (std::size_t r = 0; r < ds.num_nodes(); ++r)
    for (std::size_t c : ds.adjacency.row_cols(r)) {
      if (c <= r) continue;
      (c / 100 == r / 100 ? inside : across) += 1;
    }
  // Expected 4 · C(100,2) · 0.05 = 990 and 6 · 100² · 0.005 = 300.
  CHECK(inside > 850);
  CHECK(inside < 1130);
  CHECK(across > 220);
  CHECK(across < 380);
}

TEST_CASE("SBM is reproducible and validates parameters") {
  CHECK(small_sbm(9) == small_sbm(9));
  CHECK_FALSE(small_sbm(9) == small_sbm(10));

  auto bad = [](auto tweak) {
    SbmParams p;
    tweak(p);
    Rng rng(0);
    CHECK_THROWS_AS(synth_sbm(p, rng), ConfigError);
  };
  bad([](SbmParams& p) { p.p_in = 0.0; p.p_out = 0.0; });
  bad([](SbmParams& p) { p.p_in = 1.5; });
  bad([](SbmParams& p) { p.p_out = 0.05; });
  bad([](SbmParams& p) { p.blocks = 1; });
  bad([](SbmParams& p) { p.nodes_per_block = 5; });
  bad([](SbmParams& p) { p.feat_dim = 3; });
  bad([](SbmParams& p) { p.feat_noise = -1.0; });
}

TEST_CASE("label subsampling") {
  const GraphDataset ds = small_sbm(4);  // 3 blocks of 20: 2 train nodes each
  Rng rng(1);
  CHECK(subsample_labels(ds, 1.0, rng) == ds);

  GraphDataset big = ds;
  big.splits.train.clear();
  big.splits.val.clear();
  big.splits.test.clear();
  for (std::size_t i = 0; i < 60; ++i) {
    if (i < 42) big.splits.train.push_back(i);
    else if (i < 51) big.splits.val.push_back(i);
    else big.splits.test.push_back(i);
  }
  CHECK(subsample_labels(big, 0.1, rng).splits.train.size() == 4);
  CHECK(subsample_labels(big, 0.5, rng).splits.train.size() == 21);

  for (double fraction : {0.1, 0.25, 0.5, 0.75}) {
    const GraphDataset sub = subsample_labels(big, fraction, rng);
    const std::set<std::size_t> full(big.splits.train.begin(), big.splits.train.end());
    for (std::size_t id : sub.splits.train) CHECK(full.count(id) == 1);
    CHECK(std::is_sorted(sub.splits.train.begin(), sub.splits.train.end()));
    CHECK(sub.splits.val == big.splits.val);
    CHECK(sub.splits.test == big.splits.test);
    CHECK(sub.features == big.features);
  }

  Rng a(7);
  Rng b(7);
  CHECK(subsample_labels(big, 0.3, a) == subsample_labels(big, 0.3, b));

  Rng s(3);
  const GraphDataset strat = subsample_labels(big, 0.5, s, true);
  std::vector<int> per_class(3, 0);
  std::vector<int> full_class(3, 0);
  for (std::size_t id : strat.splits.train) ++per_class[big.labels[id]];
  for (std::size_t id : big.splits.train) ++full_class[big.labels[id]];
  for (int c = 0; c < 3; ++c) CHECK(per_class[c] == full_class[c] / 2);

  CHECK_THROWS_AS(subsample_labels(ds, 0.0, rng), ConfigError);
  CHECK_THROWS_AS(subsample_labels(ds, 0.1, rng), ConfigError);
}

TEST_CASE("140 training nodes at 10% keep 14") {
  GraphDataset ds;
  ds.features = DenseMatrix(200, 1);
  ds.labels.assign(200, 0);
  ds.num_classes = 1;
  for (std::size_t i = 0; i < 140; ++i) ds.splits.train.push_back(i);
  Rng rng(0);
  CHECK(subsample_labels(ds, 0.1, rng).splits.train.size() == 14);
  CHECK(subsample_labels(ds, 0.3, rng).splits.train.size() == 42);
}
