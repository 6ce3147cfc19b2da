#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ghnet/dense.hpp"
#include "ghnet/graph.hpp"

namespace ghnet {

using Rng = std::mt19937_64;

enum class OpKind {
  Param,
  Constant,
  MatMul,
  SpmmConst,
  AddBias,
  Relu,
  Sigmoid,
  Hadamard,
  GateCombine,
  Dropout,
  SoftmaxCrossEntropy,
  Sum,
};

std::string_view op_name(OpKind op);
std::optional<OpKind> op_from_name(std::string_view name);

// Handle to a value recorded on a Tape.
struct VarId {
  std::size_t id = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

struct Parameter {
  std::string name;
  DenseMatrix value;
  DenseMatrix grad;
  // Index of the block/layer that owns the parameter; drives weight decay scope.
  std::size_t block = 0;
  bool is_bias = false;
};

// Named trainable parameters with gradient accumulators of matching shape.
class ParamStore {
 public:
  std::size_t add(std::string name, DenseMatrix value, std::size_t block = 0, bool is_bias = false);

  bool contains(std::string_view name) const;
  std::size_t index(std::string_view name) const;
  Parameter& get(std::string_view name) { return params_[index(name)]; }
  const Parameter& get(std::string_view name) const { return params_[index(name)]; }

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const { return params_.size(); }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();

 private:
  std::vector<Parameter> params_;
};

// Fault injection for negative-control gradient checks: the backward rule of
// `corrupt_backward` has its input gradients scaled by `corrupt_scale`.
struct TapeOptions {
  std::optional<OpKind> corrupt_backward;
  double corrupt_scale = 1.5;
};

// Append-only record of primitive applications. Every input id is smaller
// than the id it feeds, so reverse id order is a valid backward schedule.
//
// spmm_const keeps a pointer to its filter: the CsrMatrix must outlive the
// tape.
class Tape {
 public:
  struct Node {
    OpKind op = OpKind::Constant;
    std::vector<std::size_t> inputs;
    DenseMatrix value;
    bool requires_grad = false;
    std::size_t param_index = 0;
    const CsrMatrix* filter = nullptr;
    // Dropout: scaled keep-mask. Softmax cross-entropy: row probabilities.
    DenseMatrix saved;
    std::vector<int> labels;
    std::vector<std::size_t> mask;
  };

  explicit Tape(TapeOptions options = {}) : options_(options) {}

  VarId param(const ParamStore& params, std::size_t index);
  VarId param(const ParamStore& params, std::string_view name);
  VarId constant(DenseMatrix value);

  VarId matmul(VarId a, VarId b);
  VarId spmm_const(const CsrMatrix& s, VarId h);
  VarId add_bias(VarId h, VarId b);
  VarId relu(VarId h);
  VarId sigmoid(VarId h);
  VarId hadamard(VarId a, VarId b);
  // t ⊙ hom + (1 − t) ⊙ het
  VarId gate_combine(VarId t, VarId hom, VarId het);
  // Inverted dropout. Returns h itself when not training or p == 0.
  VarId dropout(VarId h, double p, bool training, Rng& rng);
  // Mean over masked rows of −log softmax(logits)[label]; 1×1 result.
  VarId masked_softmax_cross_entropy(VarId logits, std::span<const int> labels,
                                     std::span<const std::size_t> mask);
  VarId sum(VarId h);

  const DenseMatrix& value(VarId v) const { return nodes_.at(v.id).value; }
  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_.at(id); }

  // Recomputes node `id` from the stored values of its inputs.
  DenseMatrix replay(std::size_t id) const;

  // Reverse sweep from a scalar loss. Gradients are added (+=) into the
  // accumulators of every parameter the loss reaches.
  void backward(VarId loss, ParamStore& params) const;

 private:
  VarId push(Node node);
  void check_id(VarId v) const;

  TapeOptions options_;
  std::vector<Node> nodes_;
};

}  // namespace ghnet
