#include <cmath>
#include <memory>
#include <random>
#include <string>

#include "ghnet/gradcheck.hpp"
#include "ghnet/models.hpp"

namespace ghnet {

namespace {

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -2.0,
                          double hi = 2.0) {
  std::uniform_real_distribution<double> unif(lo, hi);
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = unif(rng);
  return m;
}

// Entries in [−2, −margin] ∪ [margin, 2], away from the relu kink.
DenseMatrix away_from_zero(std::size_t rows, std::size_t cols, Rng& rng, double margin) {
  std::uniform_real_distribution<double> mag(margin, 2.0);
  std::bernoulli_distribution sign(0.5);
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = sign(rng) ? mag(rng) : -mag(rng);
  return m;
}

CsrMatrix random_adjacency(std::size_t n, double p, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (unif(rng) < p) edges.push_back({i, j});
  return build_csr(edges, n);
}

// Σ (v ⊙ R) for a fixed random R, so every output entry gets a distinct weight.
VarId weighted_sum(Tape& tape, VarId v, const DenseMatrix& weights) {
  return tape.sum(tape.hadamard(v, tape.constant(weights)));
}

struct Suite {
  double tolerance;
  TapeOptions options;
  std::vector<GradSuiteEntry> entries;

  void check(std::string name, const LossFn& f, ParamStore params) {
    GradSuiteEntry e;
    e.name = std::move(name);
    e.result = finite_diff_check(f, params, 1e-6, options);
    e.passed = e.result.max_rel_error < tolerance;
    entries.push_back(std::move(e));
  }
};

void primitive_checks(Suite& suite) {
  Rng rng(20240601);

  {
    ParamStore ps;
    ps.add("a", random_matrix(3, 4, rng));
    ps.add("b", random_matrix(4, 2, rng));
    const DenseMatrix r = random_matrix(3, 2, rng);
    suite.check("matmul", [r](Tape& t, const ParamStore& p) {
      return weighted_sum(t, t.matmul(t.param(p, "a"), t.param(p, "b")), r);
    }, ps);
  }
  {
    auto s = std::make_shared<CsrMatrix>(sym_normalize(random_adjacency(6, 0.5, rng), false));
    ParamStore ps;
    ps.add("h", random_matrix(6, 3, rng));
    const DenseMatrix r = random_matrix(6, 3, rng);
    suite.check("spmm_const", [s, r](Tape& t, const ParamStore& p) {
      return weighted_sum(t, t.spmm_const(*s, t.param(p, "h")), r);
    }, ps);
  }
  {
    ParamStore ps;
    ps.add("h", random_matrix(4, 3, rng));
    ps.add("b", random_matrix(1, 3, rng));
    const DenseMatrix r = random_matrix(4, 3, rng);
    suite.check("add_bias", [r](Tape& t, const ParamStore& p) {
      return weighted_sum(t, t.add_bias(t.param(p, "h"), t.param(p, "b")), r);
    }, ps);
  }
  {
    ParamStore ps;
    ps.add("h", away_from_zero(4, 4, rng, 1e-3));
    const DenseMatrix r = random_matrix(4, 4, rng);
    suite.check("relu", [r](Tape& t, const ParamStore& p) {
      return weighted_sum(t, t.relu(t.param(p, "h")), r);
    }, ps);
  }
  {
    ParamStore ps;
    ps.add("h", random_matrix(4, 3, rng));
    const DenseMatrix r = random_matrix(4, 3, rng);
    suite.check("sigmoid", [r](Tape& t, const ParamStore& p) {
      return weighted_sum(t, t.sigmoid(t.param(p, "h")), r);
    }, ps);
  }
  {
    ParamStore ps;
    ps.add("a", random_matrix(3, 3, rng));
    ps.add("b", random_matrix(3, 3, rng));
    const DenseMatrix r = random_matrix(3, 3, rng);
    suite.check("hadamard", [r](Tape& t, const ParamStore& p) {
      return weighted_sum(t, t.hadamard(t.param(p, "a"), t.param(p, "b")), r);
    }, ps);
  }
  {
    ParamStore ps;
    ps.add("t", random_matrix(3, 4, rng, 0.05, 0.95));
    ps.add("hom", random_matrix(3, 4, rng));
    ps.add("het", random_matrix(3, 4, rng));
    const DenseMatrix r = random_matrix(3, 4, rng);
    suite.check("gate_combine", [r](Tape& t, const ParamStore& p) {
      return weighted_sum(
          t, t.gate_combine(t.param(p, "t"), t.param(p, "hom"), t.param(p, "het")), r);
    }, ps);
  }
  {
    ParamStore ps;
    ps.add("h", random_matrix(5, 4, rng));
    const DenseMatrix r = random_matrix(5, 4, rng);
    // A freshly seeded generator per evaluation keeps the mask fixed.
    suite.check("dropout", [r](Tape& t, const ParamStore& p) {
      Rng mask_rng(99);
      return weighted_sum(t, t.dropout(t.param(p, "h"), 0.5, true, mask_rng), r);
    }, ps);
  }
  {
    ParamStore ps;
    ps.add("logits", random_matrix(5, 3, rng));
    const std::vector<int> labels{0, 2, 1, 1, 0};
    const std::vector<std::size_t> mask{0, 1, 3, 4};
    suite.check("masked_softmax_cross_entropy", [labels, mask](Tape& t, const ParamStore& p) {
      return t.masked_softmax_cross_entropy(t.param(p, "logits"), labels, mask);
    }, ps);
  }
  {
    ParamStore ps;
    ps.add("h", random_matrix(3, 5, rng));
    suite.check("sum", [](Tape& t, const ParamStore& p) { return t.sum(t.param(p, "h")); }, ps);
  }
}

void model_checks(Suite& suite) {
  constexpr std::size_t kNodes = 12;
  constexpr std::size_t kFeatures = 5;
  constexpr std::size_t kClasses = 3;
  Rng rng(8675309);
  const CsrMatrix adjacency = random_adjacency(kNodes, 0.3, rng);
  auto features = std::make_shared<DenseMatrix>(random_matrix(kNodes, kFeatures, rng));
  auto labels = std::make_shared<std::vector<int>>(kNodes);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(kClasses) - 1);
  for (int& y : *labels) y = pick(rng);
  const std::vector<std::size_t> mask{0, 1, 2, 4, 5, 7, 8, 10, 11};

  struct Case {
    VariantKind variant;
    std::size_t hidden;
    std::vector<std::size_t> hops;
  };
  // The outer case uses hidden == input width so block 0 exercises the
  // identity path and block 1 the projection path.
  const Case cases[] = {
      {VariantKind::Inner, 4, {2, 3}}, {VariantKind::Outer, kFeatures, {2, 3}},
      {VariantKind::Raw, 4, {2, 3}},   {VariantKind::Gcn, 4, {1, 1}},
      {VariantKind::Sgc, 4, {2}},      {VariantKind::Mlp, 4, {1, 1}},
  };
  for (const auto& c : cases) {
    const ModelConfig cfg =
        make_model_config(c.variant, kFeatures, c.hidden, kClasses, c.hops, 0.5);
    Model model = init_model(cfg, kFeatures, rng);
    // Non-zero gate biases so the bias gradients are not trivially tiny.
    for (auto& p : model.params)
      if (p.is_bias) p.value = random_matrix(1, p.value.cols(), rng, -0.5, 0.5);
    auto inputs = std::make_shared<GraphInputs>(prepare_inputs(cfg, *features, adjacency));
    auto shell = std::make_shared<Model>(model);
    suite.check("model:" + std::string(variant_name(c.variant)),
                [inputs, shell, labels, features, mask](Tape& t, const ParamStore& p) {
                  shell->params = p;
                  Rng unused(0);
                  ForwardPass pass = model_forward(t, *shell, *inputs, false, unused);
                  return t.masked_softmax_cross_entropy(pass.logits, *labels, mask);
                },
                model.params);
  }
}

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite(double tolerance, TapeOptions options) {
  Suite suite{tolerance, options, {}};
  primitive_checks(suite);
  model_checks(suite);
  return std::move(suite.entries);
}

}  // namespace ghnet
