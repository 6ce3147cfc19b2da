#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "ghnet/autodiff.hpp"
#include "ghnet/dense.hpp"
#include "ghnet/graph.hpp"

namespace ghnet {

enum class VariantKind { Inner, Outer, Raw, Mlp, Gcn, Sgc };

// CLI spelling: ghnet-i, ghnet-o, ghnet-r, mlp, gcn, sgc.
std::string_view variant_name(VariantKind v);
std::optional<VariantKind> variant_from_name(std::string_view name);
bool is_ghnet(VariantKind v);

enum class Activation { Relu, Identity };

struct BlockSpec {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::size_t hops = 1;
  Activation activation = Activation::Relu;
};

struct ModelConfig {
  VariantKind variant = VariantKind::Inner;
  std::vector<BlockSpec> blocks;
  double dropout = 0.5;
  // Replaces the learned gate with a constant (gate ablation only).
  std::optional<double> fixed_t;
  std::size_t num_classes = 0;

  // Throws ConfigError on a broken dimension chain, bad hops or a fixed_t
  // outside [0, 1].
  void validate(std::size_t input_dim) const;
};

// Standard layout: one block per entry of `hops`, hidden width between
// blocks, relu everywhere but the logit-producing block. GCN applies its
// filter hops[l] times in layer l; MLP ignores the hop values; SGC takes a
// single entry (the propagation depth).
ModelConfig make_model_config(VariantKind variant, std::size_t input_dim, std::size_t hidden,
                              std::size_t num_classes, const std::vector<std::size_t>& hops,
                              double dropout, std::optional<double> fixed_t = std::nullopt);

// Indices into the model's ParamStore. Only the parameters the variant needs
// are present.
struct BlockParams {
  std::size_t theta = 0;
  std::optional<std::size_t> w_t;
  std::optional<std::size_t> b_t;
  std::optional<std::size_t> w_h;
  std::optional<std::size_t> w_x;
};

struct Model {
  ModelConfig config;
  std::size_t input_dim = 0;
  ParamStore params;
  std::vector<BlockParams> blocks;
};

// Glorot-initialized weights, zero biases. Parameter names are
// "block<l>.theta", "block<l>.w_t", "block<l>.b_t", "block<l>.w_h",
// "block<l>.w_x".
Model init_model(const ModelConfig& config, std::size_t input_dim, Rng& rng);

// Graph-side inputs shared by every forward pass of one run. Keeps a pointer
// to the features, which must outlive this object.
struct GraphInputs {
  const DenseMatrix* features = nullptr;
  CsrMatrix filter;        // S, no self-loop (GHNet)
  CsrMatrix filter_tilde;  // S̃, with self-loop (GCN, SGC)
  DenseMatrix sgc_features;  // S̃^k X, SGC only
};

GraphInputs prepare_inputs(const ModelConfig& config, const DenseMatrix& features,
                           const CsrMatrix& adjacency);

struct BlockOutput {
  VarId output;
  std::optional<VarId> gate;
};

// T ⊙ F_hom + (1 − T) ⊙ F_het with F_hom = act(S^k·(h·Θ)). The transform is
// applied once before the k propagation steps.
BlockOutput ghnet_block_forward(Tape& tape, VarId h, VarId x_raw, const CsrMatrix& s,
                                const ParamStore& params, const BlockParams& bp,
                                const BlockSpec& spec, VariantKind variant,
                                std::optional<double> fixed_t);

// act(S̃^hops · h · Θ)
VarId gcn_layer_forward(Tape& tape, VarId h, const CsrMatrix& s_tilde, VarId theta,
                        std::size_t hops, Activation activation);

// S̃^k X, computed once per run.
DenseMatrix sgc_precompute(const CsrMatrix& s_tilde, const DenseMatrix& x, std::size_t k);
VarId sgc_forward(Tape& tape, VarId propagated, VarId w);

VarId dense_layer_forward(Tape& tape, VarId h, VarId w, Activation activation);

struct ForwardPass {
  VarId logits;
  std::vector<BlockOutput> blocks;
};

// Dropout on every block input when training; every GHNet block sees the
// same filter S and, for the raw variant, the post-dropout X of this pass.
ForwardPass model_forward(Tape& tape, const Model& model, const GraphInputs& inputs,
                          bool training, Rng& rng);

}  // namespace ghnet
