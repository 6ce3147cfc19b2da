#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "ghnet/data.hpp"
#include "ghnet/errors.hpp"
#include "ghnet/init.hpp"
#include "ghnet/train.hpp"
#include "test_util.hpp"

using namespace ghnet;
using ghnet::testing::random_dense;
namespace fs = std::filesystem;

namespace {

GraphDataset small_sbm(std::uint64_t seed = 0) {
  SbmParams p;
  p.blocks = 3;
  p.nodes_per_block = 30;
  p.p_in = 0.3;
  p.p_out = 0.02;
  p.feat_dim = 6;
  Rng rng(seed);
  return synth_sbm(p, rng);
}

TrainConfig quick_config() {
  TrainConfig tc;
  tc.max_epochs = 60;
  tc.hidden = 8;
  tc.seeds = {0, 1, 2};
  return tc;
}

double masked_loss(const DenseMatrix& logits, const GraphDataset& ds,
                   const std::vector<std::size_t>& mask) {
  Tape t;
  return t.value(t.masked_softmax_cross_entropy(t.constant(logits), ds.labels, mask))(0, 0);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<double>> read_tsv(const fs::path& p) {
  std::vector<std::vector<double>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, '\t')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("glorot bounds and spread") {
  CHECK(glorot_bound(16, 7) == doctest::Approx(0.5108).epsilon(1e-4));
  CHECK(glorot_bound(1, 1) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));

  Rng rng(0);
  const DenseMatrix w = glorot_init(300, 300, rng);
  const double a = glorot_bound(300, 300);
  double mean = 0.0;
  double max_abs = 0.0;
  for (double v : w.data()) {
    CHECK(std::abs(v) <= a);
    mean += v;
    max_abs = std::max(max_abs, std::abs(v));
  }
  mean /= static_cast<double>(w.size());
  CHECK(std::abs(mean) < 0.01);
  CHECK(max_abs > 0.99 * a);
}

TEST_CASE("Adam leaves parameters alone when gradients are zero") {
  Rng rng(1);
  ParamStore ps;
  ps.add("w", random_dense(3, 3, rng));
  const DenseMatrix before = ps.get("w").value;
  AdamState st(ps);
  for (int i = 0; i < 5; ++i) adam_step(ps, st, 0.01);
  CHECK(ps.get("w").value == before);
}

TEST_CASE("first Adam step on a unit gradient") {
  ParamStore ps;
  ps.add("w", DenseMatrix(1, 1, 1.0));
  ps.get("w").grad(0, 0) = 1.0;
  AdamState st(ps);
  adam_step(ps, st, 0.01);
  CHECK(ps.get("w").value(0, 0) - 1.0 == doctest::Approx(-0.009999999900).epsilon(1e-10));
}

TEST_CASE("Adam matches a scalar reference over 100 steps") {
  Rng rng(2);
  ParamStore ps;
  ps.add("w", random_dense(2, 3, rng));
  ps.add("b", random_dense(1, 3, rng), 0, true);
  ps.add("v", random_dense(3, 2, rng), 1);
  AdamState st(ps);

  struct Ref {
    std::vector<double> x, m, v;
    bool decay;
  };
  std::vector<Ref> ref;
  for (const auto& p : ps) {
    const std::size_t n = p.value.size();
    ref.push_back({{p.value.data().begin(), p.value.data().end()},
                   std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                   !p.is_bias && p.block == 0});
  }
  const double lr = 0.05, wd = 5e-4, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int step = 1; step <= 100; ++step) {
    std::size_t k = 0;
    for (auto& p : ps) {
      Ref& r = ref[k++];
      for (std::size_t i = 0; i < p.grad.size(); ++i) {
        const double g = unif(rng);
        p.grad.data()[i] = g;
        const double gd = g + (r.decay ? wd * r.x[i] : 0.0);
        r.m[i] = b1 * r.m[i] + (1 - b1) * gd;
        r.v[i] = b2 * r.v[i] + (1 - b2) * gd * gd;
        const double mh = r.m[i] / (1 - std::pow(b1, step));
        const double vh = r.v[i] / (1 - std::pow(b2, step));
        r.x[i] -= lr * mh / (std::sqrt(vh) + eps);
      }
    }
    adam_step(ps, st, lr, wd, DecayScope::FirstBlock);
  }
  std::size_t k = 0;
  for (const auto& p : ps) {
    const Ref& r = ref[k++];
    for (std::size_t i = 0; i < r.x.size(); ++i) CHECK(std::abs(p.value.data()[i] - r.x[i]) <= 1e-12);
  }
}

TEST_CASE("weight decay scope") {
  auto run = [](DecayScope scope) {
    ParamStore ps;
    ps.add("w0", DenseMatrix(1, 1, 1.0), 0);
    ps.add("b0", DenseMatrix(1, 1, 1.0), 0, true);
    ps.add("w1", DenseMatrix(1, 1, 1.0), 1);
    AdamState st(ps);
    adam_step(ps, st, 0.01, 0.1, scope);
    return std::vector<double>{ps.get("w0").value(0, 0), ps.get("b0").value(0, 0),
                               ps.get("w1").value(0, 0)};
  };
  const auto first = run(DecayScope::FirstBlock);
  CHECK(first[0] < 1.0);
  CHECK(first[1] == 1.0);
  CHECK(first[2] == 1.0);
  const auto all = run(DecayScope::AllBlocks);
  CHECK(all[0] < 1.0);
  CHECK(all[1] == 1.0);
  CHECK(all[2] < 1.0);
}

TEST_CASE("Adam is deterministic") {
  auto run = [] {
    Rng rng(3);
    ParamStore ps;
    ps.add("w", random_dense(4, 4, rng));
    AdamState st(ps);
    for (int i = 0; i < 10; ++i) {
      ps.get("w").grad = random_dense(4, 4, rng);
      adam_step(ps, st, 0.01, 5e-4);
    }
    return ps.get("w").value;
  };
  CHECK(run() == run());
}

TEST_CASE("accuracy") {
  const DenseMatrix logits(3, 2, {2, 1, 0, 3, 1, 1});
  const std::vector<int> labels{0, 1, 0};
  const std::vector<std::size_t> all{0, 1, 2};
  CHECK(evaluate_accuracy(logits, labels, all) == 1.0);
  const std::vector<int> tie_wrong{0, 1, 1};
  CHECK(evaluate_accuracy(logits, tie_wrong, all) == doctest::Approx(2.0 / 3.0));
  const std::vector<std::size_t> just_one{1};
  CHECK(evaluate_accuracy(logits, tie_wrong, just_one) == 1.0);

  Rng rng(4);
  const std::size_t n = 40000;
  const DenseMatrix noise = random_dense(n, 4, rng);
  std::vector<int> y(n);
  std::vector<std::size_t> mask(n);
  std::uniform_int_distribution<int> cls(0, 3);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = cls(rng);
    mask[i] = i;
  }
  CHECK(std::abs(evaluate_accuracy(noise, y, mask) - 0.25) < 0.02);
}

TEST_CASE("MAD") {
  Rng rng(5);
  DenseMatrix same(10, 4);
  const DenseMatrix row = random_dense(1, 4, rng);
  for (std::size_t r = 0; r < 10; ++r)
    for (std::size_t c = 0; c < 4; ++c) same(r, c) = row(0, c);
  CHECK(std::abs(mad_metric(same)) < 1e-12);

  // Two clusters along orthogonal axes: the cross-cluster share of all pairs.
  auto clusters = [&rng](std::size_t n) {
    DenseMatrix m(n, 3);
    std::uniform_real_distribution<double> scale(0.5, 3.0);
    for (std::size_t r = 0; r < n; ++r) m(r, r < n / 2 ? 0 : 1) = scale(rng);
    return m;
  };
  const std::size_t n = 20;
  CHECK(mad_metric(clusters(n)) ==
        doctest::Approx(static_cast<double>(n) / (2.0 * (n - 1))).epsilon(1e-12));
  const double sampled = mad_metric(clusters(200), 9);
  CHECK(std::abs(sampled - 200.0 / 398.0) < 0.07);
  CHECK(mad_metric(clusters(200), 9, 500) == mad_metric(clusters(200), 9, 500));

  DenseMatrix emb = random_dense(12, 5, rng);
  DenseMatrix scaled = emb;
  std::uniform_real_distribution<double> pos(0.1, 10.0);
  for (std::size_t r = 0; r < 12; ++r) {
    const double s = pos(rng);
    for (std::size_t c = 0; c < 5; ++c) scaled(r, c) *= s;
  }
  CHECK(std::abs(mad_metric(emb) - mad_metric(scaled)) < 1e-12);

  DenseMatrix with_zero(3, 2, {0, 0, 0, 0, 1, 0});
  // Pairs: (0,1) zero-zero = 0, (0,2) and (1,2) zero-nonzero = 1.
  CHECK(mad_metric(with_zero) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("first training loss from zero weights is ln C") {
  const GraphDataset ds = small_sbm();
  const TrainConfig tc = quick_config();
  for (auto v : {VariantKind::Mlp, VariantKind::Gcn, VariantKind::Sgc}) {
    const std::vector<std::size_t> hops = v == VariantKind::Sgc ? std::vector<std::size_t>{2}
                                                                : std::vector<std::size_t>{1, 1};
    const ModelConfig cfg = make_model_config(v, ds.num_features(), 8, 3, hops, tc.dropout);
    Rng rng(6);
    Model m = init_model(cfg, ds.num_features(), rng);
    for (auto& p : m.params) p.value = DenseMatrix(p.value.rows(), p.value.cols());
    const GraphInputs in = prepare_inputs(cfg, ds.features, ds.adjacency);
    AdamState adam(m.params);
    CHECK(train_step(m, adam, in, ds, tc, rng) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  }
}

TEST_CASE("non-finite losses raise DivergenceError") {
  GraphDataset ds = small_sbm();
  ds.features(ds.splits.train[0], 0) = std::numeric_limits<double>::quiet_NaN();
  const TrainConfig tc = quick_config();
  const ModelConfig cfg = make_model_config(VariantKind::Mlp, ds.num_features(), 8, 3, {1, 1}, 0.0);
  CHECK_THROWS_AS(train_model(cfg, tc, ds, 0), DivergenceError);
}

TEST_CASE("early stopping restores the best validation epoch") {
  const GraphDataset ds = small_sbm(7);
  TrainConfig tc = quick_config();
  tc.max_epochs = 300;
  tc.lr = 0.05;
  const ModelConfig cfg = make_model_config(VariantKind::Inner, ds.num_features(), 8, 3, {1, 2}, 0.5);
  const TrainResult r = train_model(cfg, tc, ds, 0);
  const auto& h = r.metrics.history;
  REQUIRE(r.metrics.best_epoch >= 1);
  REQUIRE(r.metrics.best_epoch <= h.size());
  const double best = h[r.metrics.best_epoch - 1].val_loss;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (i + 1 < r.metrics.best_epoch) CHECK(h[i].val_loss > best);
    else CHECK(h[i].val_loss >= best);
  }
  CHECK(h.size() == std::min(tc.max_epochs, r.metrics.best_epoch + tc.patience));

  const EvalOutputs eval = evaluate_model(r.model, prepare_inputs(cfg, ds.features, ds.adjacency));
  CHECK(masked_loss(eval.logits, ds, ds.splits.val) == best);
  CHECK(evaluate_accuracy(eval.logits, ds.labels, ds.splits.test) == r.metrics.test_acc);
  CHECK(r.metrics.test_acc > 0.6);
}

TEST_CASE("training is reproducible and independent of the thread count") {
  const GraphDataset ds = small_sbm(8);
  const TrainConfig tc = quick_config();
  const ModelConfig cfg = make_model_config(VariantKind::Raw, ds.num_features(), 8, 3, {1, 3}, 0.5);
  const TrainResult a = train_model(cfg, tc, ds, 1);
  const TrainResult b = train_model(cfg, tc, ds, 1);
  CHECK(a.metrics.history == b.metrics.history);
  CHECK(a.metrics.test_acc == b.metrics.test_acc);

  const auto serial = train_seeds(cfg, tc, ds, 1);
  const auto parallel = train_seeds(cfg, tc, ds, 3);
  REQUIRE(serial.size() == 3);
  REQUIRE(parallel.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(serial[i].metrics.seed == tc.seeds[i]);
    CHECK(parallel[i].metrics.seed == tc.seeds[i]);
    CHECK(serial[i].metrics.history == parallel[i].metrics.history);
    CHECK(serial[i].metrics.test_acc == parallel[i].metrics.test_acc);
  }
  CHECK(serial[1].metrics.history == a.metrics.history);
}

TEST_CASE("run metrics JSON") {
  RunMetrics m;
  m.history = {{1.5, 1.2, 0.4}, {1.1, 1.0, 0.6}};
  m.test_acc = 0.75;
  m.best_epoch = 2;
  m.seed = 3;
  const auto j = run_metrics_to_json(m, {{"model", "gcn"}});
  CHECK(j.at("seed") == 3);
  CHECK(j.at("config").at("model") == "gcn");
  CHECK(j.at("history").size() == 2);
  CHECK(j.at("history")[1] == nlohmann::json::array({1.1, 1.0, 0.6}));
  CHECK(j.at("test_acc") == 0.75);
  CHECK(j.at("best_epoch") == 2);
  CHECK(j.contains("wall_ms"));
}

TEST_CASE("embedding and gate exports") {
  const GraphDataset ds = small_sbm(9);
  const TrainConfig tc = quick_config();
  const ModelConfig cfg = make_model_config(VariantKind::Inner, ds.num_features(), 8, 3, {1, 3}, 0.5);
  TrainResult r = train_model(cfg, tc, ds, 0);
  const fs::path dir = fs::temp_directory_path() / "ghnet_train_test_exports";
  fs::remove_all(dir);

  export_embeddings(r.model, ds, 0, dir / "emb.tsv");
  const auto rows = read_tsv(dir / "emb.tsv");
  REQUIRE(rows.size() == ds.num_nodes());
  const EvalOutputs eval = evaluate_model(r.model, prepare_inputs(cfg, ds.features, ds.adjacency));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    REQUIRE(rows[i].size() == 9);
    for (std::size_t c = 0; c < 8; ++c) CHECK(rows[i][c] == eval.block_outputs[0](i, c));
    CHECK(rows[i][8] == ds.labels[i]);
  }
  export_embeddings(r.model, ds, 0, dir / "emb2.tsv");
  CHECK(slurp(dir / "emb.tsv") == slurp(dir / "emb2.tsv"));
  CHECK_THROWS(export_embeddings(r.model, ds, 2, dir / "bad.tsv"));

  export_gate_histogram(r.model, ds, 0, 40, 3, dir / "gates.tsv");
  const auto gates = read_tsv(dir / "gates.tsv");
  CHECK(gates.size() == 40);
  std::set<double> ids;
  for (const auto& g : gates) {
    REQUIRE(g.size() == 9);
    ids.insert(g[0]);
    for (std::size_t c = 1; c < 9; ++c) {
      CHECK(g[c] > 0.0);
      CHECK(g[c] < 1.0);
    }
  }
  CHECK(ids.size() == 40);

  // A zero gate network gives sigmoid(0) everywhere.
  r.model.params.get("block0.w_t").value = DenseMatrix(ds.num_features(), 8);
  r.model.params.get("block0.b_t").value = DenseMatrix(1, 8);
  export_gate_histogram(r.model, ds, 0, 200, 3, dir / "half.tsv");
  const auto half = read_tsv(dir / "half.tsv");
  CHECK(half.size() == ds.num_nodes());
  for (const auto& g : half)
    for (std::size_t c = 1; c < g.size(); ++c) CHECK(g[c] == 0.5);

  const ModelConfig gcn = make_model_config(VariantKind::Gcn, ds.num_features(), 8, 3, {1, 1}, 0.5);
  Rng rng(0);
  const Model plain = init_model(gcn, ds.num_features(), rng);
  CHECK_THROWS_AS(export_gate_histogram(plain, ds, 0, 10, 0, dir / "none.tsv"), ConfigError);
}

TEST_CASE("training config validation") {
  TrainConfig tc;
  CHECK_NOTHROW(tc.validate());
  tc.lr = 0.0;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
  tc = TrainConfig{};
  tc.seeds.clear();
  CHECK_THROWS_AS(tc.validate(), ConfigError);
  tc = TrainConfig{};
  tc.dropout = 1.0;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
}
