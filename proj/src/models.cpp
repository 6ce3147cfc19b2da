#include "ghnet/models.hpp"

#include <array>
#include <string>
#include <utility>

#include "ghnet/errors.hpp"
#include "ghnet/init.hpp"

namespace ghnet {

namespace {

constexpr std::array<std::pair<VariantKind, std::string_view>, 6> kVariantNames{{
    {VariantKind::Inner, "ghnet-i"},
    {VariantKind::Outer, "ghnet-o"},
    {VariantKind::Raw, "ghnet-r"},
    {VariantKind::Mlp, "mlp"},
    {VariantKind::Gcn, "gcn"},
    {VariantKind::Sgc, "sgc"},
}};

VarId activate(Tape& tape, VarId v, Activation act) {
  return act == Activation::Relu ? tape.relu(v) : v;
}

std::string block_prefix(std::size_t l) { return "block" + std::to_string(l) + "."; }

}  // namespace

std::string_view variant_name(VariantKind v) {
  for (const auto& [kind, name] : kVariantNames)
    if (kind == v) return name;
  return "unknown";
}

std::optional<VariantKind> variant_from_name(std::string_view name) {
  for (const auto& [kind, n] : kVariantNames)
    if (n == name) return kind;
  return std::nullopt;
}

bool is_ghnet(VariantKind v) {
  return v == VariantKind::Inner || v == VariantKind::Outer || v == VariantKind::Raw;
}

void ModelConfig::validate(std::size_t input_dim) const {
  if (blocks.empty()) throw ConfigError("model needs at least one block");
  if (num_classes == 0) throw ConfigError("num_classes must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (variant == VariantKind::Sgc && blocks.size() != 1) {
    throw ConfigError("sgc takes exactly one hop count (a single linear block)");
  }
  if (fixed_t) {
    if (!is_ghnet(variant)) throw ConfigError("fixed_t only applies to ghnet variants");
    if (!(*fixed_t >= 0.0 && *fixed_t <= 1.0)) throw ConfigError("fixed_t must lie in [0, 1]");
  }
  if (blocks.front().in_dim != input_dim) {
    throw ConfigError("first block expects " + std::to_string(blocks.front().in_dim) +
                      " input features but the dataset has " + std::to_string(input_dim));
  }
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const auto& b = blocks[l];
    if (b.in_dim == 0 || b.out_dim == 0) throw ConfigError("block dimensions must be positive");
    if (b.hops == 0) throw ConfigError("block " + std::to_string(l) + ": hops must be >= 1");
    if (l + 1 < blocks.size() && blocks[l + 1].in_dim != b.out_dim) {
      throw ConfigError("block " + std::to_string(l) + " outputs " + std::to_string(b.out_dim) +
                        " but block " + std::to_string(l + 1) + " expects " +
                        std::to_string(blocks[l + 1].in_dim));
    }
  }
  if (blocks.back().out_dim != num_classes) {
    throw ConfigError("last block outputs " + std::to_string(blocks.back().out_dim) +
                      " but there are " + std::to_string(num_classes) + " classes");
  }
  if (blocks.back().activation != Activation::Identity) {
    throw ConfigError("the logit-producing block must use the identity activation");
  }
}

ModelConfig make_model_config(VariantKind variant, std::size_t input_dim, std::size_t hidden,
                              std::size_t num_classes, const std::vector<std::size_t>& hops,
                              double dropout, std::optional<double> fixed_t) {
  if (hops.empty()) throw ConfigError("hops list is empty");
  ModelConfig cfg;
  cfg.variant = variant;
  cfg.dropout = dropout;
  cfg.fixed_t = fixed_t;
  cfg.num_classes = num_classes;
  std::size_t in = input_dim;
  for (std::size_t l = 0; l < hops.size(); ++l) {
    const bool last = l + 1 == hops.size();
    BlockSpec b;
    b.in_dim = in;
    b.out_dim = last ? num_classes : hidden;
    b.hops = hops[l];
    b.activation = last ? Activation::Identity : Activation::Relu;
    cfg.blocks.push_back(b);
    in = b.out_dim;
  }
  cfg.validate(input_dim);
  return cfg;
}

Model init_model(const ModelConfig& config, std::size_t input_dim, Rng& rng) {
  config.validate(input_dim);
  Model m;
  m.config = config;
  m.input_dim = input_dim;
  for (std::size_t l = 0; l < config.blocks.size(); ++l) {
    const auto& spec = config.blocks[l];
    const std::string pre = block_prefix(l);
    BlockParams bp;
    bp.theta = m.params.add(pre + "theta", glorot_init(spec.in_dim, spec.out_dim, rng), l);
    if (is_ghnet(config.variant)) {
      if (!config.fixed_t) {
        bp.w_t = m.params.add(pre + "w_t", glorot_init(spec.in_dim, spec.out_dim, rng), l);
        bp.b_t = m.params.add(pre + "b_t", DenseMatrix(1, spec.out_dim), l, true);
      }
      if (config.variant == VariantKind::Outer && spec.in_dim != spec.out_dim) {
        bp.w_h = m.params.add(pre + "w_h", glorot_init(spec.in_dim, spec.out_dim, rng), l);
      }
      if (config.variant == VariantKind::Raw) {
        bp.w_x = m.params.add(pre + "w_x", glorot_init(input_dim, spec.out_dim, rng), l);
      }
    }
    m.blocks.push_back(bp);
  }
  return m;
}

GraphInputs prepare_inputs(const ModelConfig& config, const DenseMatrix& features,
                           const CsrMatrix& adjacency) {
  if (adjacency.num_rows() != features.rows()) {
    throw ConfigError("adjacency has " + std::to_string(adjacency.num_rows()) +
                      " nodes but features have " + std::to_string(features.rows()) + " rows");
  }
  GraphInputs in;
  in.features = &features;
  if (is_ghnet(config.variant)) in.filter = sym_normalize(adjacency, false);
  if (config.variant == VariantKind::Gcn || config.variant == VariantKind::Sgc) {
    in.filter_tilde = sym_normalize(adjacency, true);
  }
  if (config.variant == VariantKind::Sgc) {
    in.sgc_features = sgc_precompute(in.filter_tilde, features, config.blocks.front().hops);
  }
  return in;
}

BlockOutput ghnet_block_forward(Tape& tape, VarId h, VarId x_raw, const CsrMatrix& s,
                                const ParamStore& params, const BlockParams& bp,
                                const BlockSpec& spec, VariantKind variant,
                                std::optional<double> fixed_t) {
  if (!is_ghnet(variant)) throw ConfigError("ghnet_block_forward: not a ghnet variant");
  if (h.cols != spec.in_dim) {
    throw ShapeError("ghnet block expects width " + std::to_string(spec.in_dim) + ", got " +
                     std::to_string(h.cols));
  }

  const VarId transformed = tape.matmul(h, tape.param(params, bp.theta));
  VarId propagated = transformed;
  for (std::size_t i = 0; i < spec.hops; ++i) propagated = tape.spmm_const(s, propagated);
  const VarId f_hom = activate(tape, propagated, spec.activation);

  VarId f_het;
  switch (variant) {
    case VariantKind::Inner:
      f_het = transformed;
      break;
    case VariantKind::Outer:
      if (spec.in_dim == spec.out_dim) {
        f_het = h;
      } else {
        if (!bp.w_h) throw ConfigError("outer infusion with in_dim != out_dim needs w_h");
        f_het = tape.matmul(h, tape.param(params, *bp.w_h));
      }
      break;
    case VariantKind::Raw:
      if (!bp.w_x) throw ConfigError("raw infusion needs w_x");
      f_het = tape.matmul(x_raw, tape.param(params, *bp.w_x));
      break;
    default:
      break;
  }

  VarId gate;
  if (fixed_t) {
    gate = tape.constant(DenseMatrix(f_hom.rows, f_hom.cols, *fixed_t));
  } else {
    if (!bp.w_t || !bp.b_t) throw ConfigError("learned gate needs w_t and b_t");
    const VarId pre = tape.add_bias(tape.matmul(h, tape.param(params, *bp.w_t)),
                                    tape.param(params, *bp.b_t));
    gate = tape.sigmoid(pre);
  }
  return {tape.gate_combine(gate, f_hom, f_het), gate};
}

VarId gcn_layer_forward(Tape& tape, VarId h, const CsrMatrix& s_tilde, VarId theta,
                        std::size_t hops, Activation activation) {
  VarId out = tape.matmul(h, theta);
  for (std::size_t i = 0; i < hops; ++i) out = tape.spmm_const(s_tilde, out);
  return activate(tape, out, activation);
}

DenseMatrix sgc_precompute(const CsrMatrix& s_tilde, const DenseMatrix& x, std::size_t k) {
  return k_hop_propagate(s_tilde, x, k);
}

VarId sgc_forward(Tape& tape, VarId propagated, VarId w) { return tape.matmul(propagated, w); }

VarId dense_layer_forward(Tape& tape, VarId h, VarId w, Activation activation) {
  return activate(tape, tape.matmul(h, w), activation);
}

ForwardPass model_forward(Tape& tape, const Model& model, const GraphInputs& inputs,
                          bool training, Rng& rng) {
  const ModelConfig& cfg = model.config;
  if (inputs.features == nullptr) throw ConfigError("model_forward: inputs not prepared");
  if (inputs.features->cols() != model.input_dim) {
    throw ConfigError("model_forward: dataset has " + std::to_string(inputs.features->cols()) +
                      " features, model expects " + std::to_string(model.input_dim));
  }

  ForwardPass pass;
  const DenseMatrix& x0 =
      cfg.variant == VariantKind::Sgc ? inputs.sgc_features : *inputs.features;
  VarId h = tape.dropout(tape.constant(x0), cfg.dropout, training, rng);
  const VarId x_raw = h;

  for (std::size_t l = 0; l < cfg.blocks.size(); ++l) {
    if (l > 0) h = tape.dropout(h, cfg.dropout, training, rng);
    const BlockSpec& spec = cfg.blocks[l];
    const BlockParams& bp = model.blocks[l];
    BlockOutput out;
    switch (cfg.variant) {
      case VariantKind::Inner:
      case VariantKind::Outer:
      case VariantKind::Raw:
        out = ghnet_block_forward(tape, h, x_raw, inputs.filter, model.params, bp, spec,
                                  cfg.variant, cfg.fixed_t);
        break;
      case VariantKind::Gcn:
        out.output = gcn_layer_forward(tape, h, inputs.filter_tilde,
                                       tape.param(model.params, bp.theta), spec.hops,
                                       spec.activation);
        break;
      case VariantKind::Sgc:
        out.output = sgc_forward(tape, h, tape.param(model.params, bp.theta));
        break;
      case VariantKind::Mlp:
        out.output =
            dense_layer_forward(tape, h, tape.param(model.params, bp.theta), spec.activation);
        break;
    }
    pass.blocks.push_back(out);
    h = out.output;
  }
  pass.logits = h;
  return pass;
}

}  // namespace ghnet
