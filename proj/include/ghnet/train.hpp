#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "ghnet/autodiff.hpp"
#include "ghnet/data.hpp"
#include "ghnet/init.hpp"
#include "ghnet/models.hpp"

namespace ghnet {

enum class DecayScope { FirstBlock, AllBlocks };

struct TrainConfig {
  double lr = 0.01;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  double weight_decay = 5e-4;
  DecayScope decay_scope = DecayScope::FirstBlock;
  double dropout = 0.5;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::size_t hidden = 16;

  void validate() const;
};

struct AdamState {
  explicit AdamState(const ParamStore& params);

  std::vector<DenseMatrix> m;
  std::vector<DenseMatrix> v;
  std::size_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update from the accumulated gradients. Weight decay
// is added to the gradient (L2) of non-bias parameters in scope before the
// moment update.
void adam_step(ParamStore& params, AdamState& state, double lr, double weight_decay = 0.0,
               DecayScope scope = DecayScope::FirstBlock);

struct EpochRecord {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct RunMetrics {
  std::vector<EpochRecord> history;
  double test_acc = 0.0;
  std::size_t best_epoch = 0;  // 1-based index into history
  double wall_ms = 0.0;
  std::uint64_t seed = 0;
};

struct TrainResult {
  Model model;
  RunMetrics metrics;
};

// Values of one evaluation-mode forward pass.
struct EvalOutputs {
  DenseMatrix logits;
  std::vector<DenseMatrix> block_outputs;
  std::vector<DenseMatrix> gates;  // empty matrices for ungated blocks
};

EvalOutputs evaluate_model(const Model& model, const GraphInputs& inputs);

// One optimization step on the training mask; returns the training loss
// (cross-entropy, without the decay term). Throws DivergenceError on a
// non-finite loss.
double train_step(Model& model, AdamState& adam, const GraphInputs& inputs,
                  const GraphDataset& ds, const TrainConfig& tc, Rng& rng);

// Adam with early stopping on validation loss. Parameters from the
// best-validation epoch are restored before the test accuracy is taken.
TrainResult train_model(const ModelConfig& config, const TrainConfig& tc, const GraphDataset& ds,
                        std::uint64_t seed);

// Trains one model per seed, up to `max_threads` concurrently. Results come
// back in seed order and do not depend on the thread count.
std::vector<TrainResult> train_seeds(const ModelConfig& config, const TrainConfig& tc,
                                     const GraphDataset& ds, std::size_t max_threads);

// Fraction of masked nodes whose argmax logit (lowest index on ties) equals
// the label.
double evaluate_accuracy(const DenseMatrix& logits, std::span<const int> labels,
                         std::span<const std::size_t> mask);

// Mean cosine distance over node pairs: every pair when there are at most
// `max_pairs`, otherwise `max_pairs` pairs drawn from `seed`. A zero row is
// at distance 0 from another zero row and 1 from anything else.
double mad_metric(const DenseMatrix& embeddings, std::uint64_t seed = 0,
                  std::size_t max_pairs = 500);

// n rows: the block's output values followed by the node label.
void export_embeddings(const Model& model, const GraphDataset& ds, std::size_t block,
                       const std::filesystem::path& path);

// `sample` randomly chosen nodes: node id followed by its gate values.
void export_gate_histogram(const Model& model, const GraphDataset& ds, std::size_t block,
                           std::size_t sample, std::uint64_t seed,
                           const std::filesystem::path& path);

nlohmann::json run_metrics_to_json(const RunMetrics& metrics, const nlohmann::json& config_echo);

}  // namespace ghnet
