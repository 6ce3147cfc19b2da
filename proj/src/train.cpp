#include "ghnet/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <random>
#include <thread>

#include "ghnet/errors.hpp"
#include "ghnet/io.hpp"

namespace ghnet {

DenseMatrix glorot_init(std::size_t rows, std::size_t cols, Rng& rng) {
  const double a = glorot_bound(rows, cols);
  std::uniform_real_distribution<double> unif(-a, a);
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = unif(rng);
  return m;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (max_epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (hidden < 1) throw ConfigError("hidden size must be >= 1");
}

AdamState::AdamState(const ParamStore& params) {
  for (const auto& p : params) {
    m.emplace_back(p.value.rows(), p.value.cols());
    v.emplace_back(p.value.rows(), p.value.cols());
  }
}

void adam_step(ParamStore& params, AdamState& state, double lr, double weight_decay,
               DecayScope scope) {
  if (state.m.size() != params.size()) throw ConfigError("adam_step: state/parameter mismatch");
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double bias1 = 1.0 - std::pow(state.beta1, t);
  const double bias2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    const bool decays = weight_decay > 0.0 && !p.is_bias &&
                        (scope == DecayScope::AllBlocks || p.block == 0);
    auto& w = p.value.data();
    const auto& g = p.grad.data();
    auto& m = state.m[i].data();
    auto& v = state.v[i].data();
    for (std::size_t e = 0; e < w.size(); ++e) {
      const double grad = decays ? g[e] + weight_decay * w[e] : g[e];
      m[e] = state.beta1 * m[e] + (1.0 - state.beta1) * grad;
      v[e] = state.beta2 * v[e] + (1.0 - state.beta2) * grad * grad;
      const double m_hat = m[e] / bias1;
      const double v_hat = v[e] / bias2;
      w[e] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

EvalOutputs evaluate_model(const Model& model, const GraphInputs& inputs) {
  Tape tape;
  Rng unused(0);
  ForwardPass pass = model_forward(tape, model, inputs, false, unused);
  EvalOutputs out;
  out.logits = tape.value(pass.logits);
  for (const auto& b : pass.blocks) {
    out.block_outputs.push_back(tape.value(b.output));
    out.gates.push_back(b.gate ? tape.value(*b.gate) : DenseMatrix());
  }
  return out;
}

namespace {

double masked_loss(const DenseMatrix& logits, const GraphDataset& ds,
                   std::span<const std::size_t> mask) {
  Tape tape;
  VarId l = tape.constant(logits);
  return tape.value(tape.masked_softmax_cross_entropy(l, ds.labels, mask))(0, 0);
}

}  // namespace

double train_step(Model& model, AdamState& adam, const GraphInputs& inputs,
                  const GraphDataset& ds, const TrainConfig& tc, Rng& rng) {
  Tape tape;
  ForwardPass pass = model_forward(tape, model, inputs, true, rng);
  VarId loss = tape.masked_softmax_cross_entropy(pass.logits, ds.labels, ds.splits.train);
  const double value = tape.value(loss)(0, 0);
  if (!std::isfinite(value)) {
    throw DivergenceError("training loss became non-finite (" + format_real(value) +
                          ") at optimizer step " + std::to_string(adam.t + 1));
  }
  model.params.zero_grad();
  tape.backward(loss, model.params);
  adam_step(model.params, adam, tc.lr, tc.weight_decay, tc.decay_scope);
  return value;
}

TrainResult train_model(const ModelConfig& config, const TrainConfig& tc, const GraphDataset& ds,
                        std::uint64_t seed) {
  tc.validate();
  const auto start = std::chrono::steady_clock::now();
  Rng rng(seed);
  TrainResult result{init_model(config, ds.num_features(), rng), {}};
  Model& model = result.model;
  const GraphInputs inputs = prepare_inputs(config, ds.features, ds.adjacency);
  AdamState adam(model.params);

  RunMetrics& metrics = result.metrics;
  metrics.seed = seed;
  double best_val = std::numeric_limits<double>::infinity();
  ParamStore best_params = model.params;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.train_loss = train_step(model, adam, inputs, ds, tc, rng);
    const EvalOutputs eval = evaluate_model(model, inputs);
    rec.val_loss = masked_loss(eval.logits, ds, ds.splits.val);
    rec.val_acc = evaluate_accuracy(eval.logits, ds.labels, ds.splits.val);
    if (!std::isfinite(rec.val_loss)) {
      throw DivergenceError("validation loss became non-finite at epoch " + std::to_string(epoch));
    }
    metrics.history.push_back(rec);

    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      best_params = model.params;
      metrics.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= tc.patience) {
      break;
    }
  }

  model.params = std::move(best_params);
  model.params.zero_grad();
  const EvalOutputs final_eval = evaluate_model(model, inputs);
  metrics.test_acc = evaluate_accuracy(final_eval.logits, ds.labels, ds.splits.test);
  metrics.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::vector<TrainResult> train_seeds(const ModelConfig& config, const TrainConfig& tc,
                                     const GraphDataset& ds, std::size_t max_threads) {
  tc.validate();
  const std::size_t n = tc.seeds.size();
  std::vector<std::optional<TrainResult>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i] = train_model(config, tc, ds, tc.seeds[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(max_threads, 1, n);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<TrainResult> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

double evaluate_accuracy(const DenseMatrix& logits, std::span<const int> labels,
                         std::span<const std::size_t> mask) {
  if (mask.empty()) throw ConfigError("evaluate_accuracy: empty mask");
  std::size_t correct = 0;
  for (std::size_t node : mask) {
    auto row = logits.row(node);
    // max_element returns the first maximum: ties go to the lowest class.
    const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == labels[node]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(mask.size());
}

namespace {

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 && nb == 0.0) return 0.0;
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

double mad_metric(const DenseMatrix& embeddings, std::uint64_t seed, std::size_t max_pairs) {
  const std::size_t n = embeddings.rows();
  if (n < 2) throw ConfigError("mad_metric: need at least two rows");
  if (max_pairs == 0) throw ConfigError("mad_metric: max_pairs must be positive");
  const std::size_t all_pairs = n * (n - 1) / 2;
  double total = 0.0;
  std::size_t count = 0;
  if (all_pairs <= max_pairs) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        total += cosine_distance(embeddings.row(i), embeddings.row(j));
        ++count;
      }
  } else {
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    while (count < max_pairs) {
      const std::size_t i = pick(rng);
      const std::size_t j = pick(rng);
      if (i == j) continue;
      total += cosine_distance(embeddings.row(i), embeddings.row(j));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

void export_embeddings(const Model& model, const GraphDataset& ds, std::size_t block,
                       const std::filesystem::path& path) {
  if (block >= model.config.blocks.size()) {
    throw ConfigError("export_embeddings: model has no block " + std::to_string(block));
  }
  const GraphInputs inputs = prepare_inputs(model.config, ds.features, ds.adjacency);
  const EvalOutputs eval = evaluate_model(model, inputs);
  const DenseMatrix& emb = eval.block_outputs[block];
  std::string text;
  for (std::size_t i = 0; i < emb.rows(); ++i) {
    for (double v : emb.row(i)) text += format_real(v) + "\t";
    text += std::to_string(ds.labels[i]) + "\n";
  }
  write_file_atomic(path, text);
}

void export_gate_histogram(const Model& model, const GraphDataset& ds, std::size_t block,
                           std::size_t sample, std::uint64_t seed,
                           const std::filesystem::path& path) {
  if (!is_ghnet(model.config.variant)) {
    throw ConfigError("export_gate_histogram: only ghnet variants have gates");
  }
  if (block >= model.config.blocks.size()) {
    throw ConfigError("export_gate_histogram: model has no block " + std::to_string(block));
  }
  const GraphInputs inputs = prepare_inputs(model.config, ds.features, ds.adjacency);
  const EvalOutputs eval = evaluate_model(model, inputs);
  const DenseMatrix& gates = eval.gates[block];

  std::vector<std::size_t> nodes(gates.rows());
  for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = i;
  Rng rng(seed);
  std::shuffle(nodes.begin(), nodes.end(), rng);
  nodes.resize(std::min(sample, nodes.size()));
  std::sort(nodes.begin(), nodes.end());

  std::string text;
  for (std::size_t node : nodes) {
    text += std::to_string(node);
    for (double g : gates.row(node)) text += "\t" + format_real(g);
    text += "\n";
  }
  write_file_atomic(path, text);
}

nlohmann::json run_metrics_to_json(const RunMetrics& metrics, const nlohmann::json& config_echo) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& r : metrics.history) history.push_back({r.train_loss, r.val_loss, r.val_acc});
  return {{"seed", metrics.seed},
          {"config", config_echo},
          {"history", std::move(history)},
          {"test_acc", metrics.test_acc},
          {"best_epoch", metrics.best_epoch},
          {"wall_ms", metrics.wall_ms}};
}

}  // namespace ghnet
