#include "ghnet/autodiff.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <utility>

#include "ghnet/errors.hpp"

namespace ghnet {

namespace {

constexpr std::array<std::pair<OpKind, std::string_view>, 12> kOpNames{{
    {OpKind::Param, "param"},
    {OpKind::Constant, "constant"},
    {OpKind::MatMul, "matmul"},
    {OpKind::SpmmConst, "spmm_const"},
    {OpKind::AddBias, "add_bias"},
    {OpKind::Relu, "relu"},
    {OpKind::Sigmoid, "sigmoid"},
    {OpKind::Hadamard, "hadamard"},
    {OpKind::GateCombine, "gate_combine"},
    {OpKind::Dropout, "dropout"},
    {OpKind::SoftmaxCrossEntropy, "masked_softmax_cross_entropy"},
    {OpKind::Sum, "sum"},
}};

std::string shape_str(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void add_into(DenseMatrix& dst, const DenseMatrix& delta) {
  if (dst.size() == 0) {
    dst = delta;
    return;
  }
  auto& d = dst.data();
  const auto& s = delta.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

// Softmax probabilities of the masked rows plus the mean cross-entropy.
std::pair<DenseMatrix, double> softmax_xent(const DenseMatrix& logits,
                                            const std::vector<int>& labels,
                                            const std::vector<std::size_t>& mask) {
  DenseMatrix probs(logits.rows(), logits.cols());
  double total = 0.0;
  for (std::size_t node : mask) {
    auto row = logits.row(node);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    const double log_z = std::log(z);
    auto prow = probs.row(node);
    for (std::size_t c = 0; c < row.size(); ++c) prow[c] = std::exp(row[c] - mx - log_z);
    total += -(row[static_cast<std::size_t>(labels[node])] - mx - log_z);
  }
  return {std::move(probs), total / static_cast<double>(mask.size())};
}

}  // namespace

std::string_view op_name(OpKind op) {
  for (const auto& [kind, name] : kOpNames)
    if (kind == op) return name;
  return "unknown";
}

std::optional<OpKind> op_from_name(std::string_view name) {
  for (const auto& [kind, n] : kOpNames)
    if (n == name) return kind;
  return std::nullopt;
}

std::size_t ParamStore::add(std::string name, DenseMatrix value, std::size_t block, bool is_bias) {
  if (contains(name)) throw ConfigError("ParamStore: duplicate parameter '" + name + "'");
  Parameter p;
  p.grad = DenseMatrix(value.rows(), value.cols());
  p.value = std::move(value);
  p.name = std::move(name);
  p.block = block;
  p.is_bias = is_bias;
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

bool ParamStore::contains(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(),
                     [&](const Parameter& p) { return p.name == name; });
}

std::size_t ParamStore::index(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  throw ConfigError("ParamStore: no parameter named '" + std::string(name) + "'");
}

void ParamStore::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.data().begin(), p.grad.data().end(), 0.0);
}

VarId Tape::push(Node node) {
  const std::size_t id = nodes_.size();
  const VarId v{id, node.value.rows(), node.value.cols()};
  nodes_.push_back(std::move(node));
  return v;
}

void Tape::check_id(VarId v) const {
  if (v.id >= nodes_.size()) throw std::out_of_range("Tape: unknown VarId");
}

VarId Tape::param(const ParamStore& params, std::size_t index) {
  Node n;
  n.op = OpKind::Param;
  n.param_index = index;
  n.value = params[index].value;
  n.requires_grad = true;
  return push(std::move(n));
}

VarId Tape::param(const ParamStore& params, std::string_view name) {
  return param(params, params.index(name));
}

VarId Tape::constant(DenseMatrix value) {
  Node n;
  n.op = OpKind::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

VarId Tape::matmul(VarId a, VarId b) {
  check_id(a);
  check_id(b);
  const auto& av = nodes_[a.id].value;
  const auto& bv = nodes_[b.id].value;
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: " + shape_str(av) + " times " + shape_str(bv));
  }
  Node n;
  n.op = OpKind::MatMul;
  n.inputs = {a.id, b.id};
  n.requires_grad = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
  n.value = ghnet::matmul(av, bv);
  return push(std::move(n));
}

VarId Tape::spmm_const(const CsrMatrix& s, VarId h) {
  check_id(h);
  const auto& hv = nodes_[h.id].value;
  if (s.num_cols() != hv.rows()) {
    throw ShapeError("spmm_const: filter " + std::to_string(s.num_rows()) + "x" +
                     std::to_string(s.num_cols()) + " times " + shape_str(hv));
  }
  Node n;
  n.op = OpKind::SpmmConst;
  n.inputs = {h.id};
  n.filter = &s;
  n.requires_grad = nodes_[h.id].requires_grad;
  n.value = ghnet::spmm(s, hv);
  return push(std::move(n));
}

VarId Tape::add_bias(VarId h, VarId b) {
  check_id(h);
  check_id(b);
  const auto& hv = nodes_[h.id].value;
  const auto& bv = nodes_[b.id].value;
  if (bv.rows() != 1 || bv.cols() != hv.cols()) {
    throw ShapeError("add_bias: bias " + shape_str(bv) + " does not fit " + shape_str(hv));
  }
  Node n;
  n.op = OpKind::AddBias;
  n.inputs = {h.id, b.id};
  n.requires_grad = nodes_[h.id].requires_grad || nodes_[b.id].requires_grad;
  n.value = hv;
  for (std::size_t r = 0; r < hv.rows(); ++r) {
    auto row = n.value.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv(0, c);
  }
  return push(std::move(n));
}

VarId Tape::relu(VarId h) {
  check_id(h);
  Node n;
  n.op = OpKind::Relu;
  n.inputs = {h.id};
  n.requires_grad = nodes_[h.id].requires_grad;
  n.value = nodes_[h.id].value;
  for (double& v : n.value.data()) v = v < 0.0 ? 0.0 : v;
  return push(std::move(n));
}

VarId Tape::sigmoid(VarId h) {
  check_id(h);
  Node n;
  n.op = OpKind::Sigmoid;
  n.inputs = {h.id};
  n.requires_grad = nodes_[h.id].requires_grad;
  n.value = nodes_[h.id].value;
  for (double& v : n.value.data()) v = sigmoid_scalar(v);
  return push(std::move(n));
}

VarId Tape::hadamard(VarId a, VarId b) {
  check_id(a);
  check_id(b);
  const auto& av = nodes_[a.id].value;
  const auto& bv = nodes_[b.id].value;
  if (!av.same_shape(bv)) throw ShapeError("hadamard: " + shape_str(av) + " vs " + shape_str(bv));
  Node n;
  n.op = OpKind::Hadamard;
  n.inputs = {a.id, b.id};
  n.requires_grad = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
  n.value = av;
  for (std::size_t i = 0; i < av.size(); ++i) n.value.data()[i] *= bv.data()[i];
  return push(std::move(n));
}

VarId Tape::gate_combine(VarId t, VarId hom, VarId het) {
  check_id(t);
  check_id(hom);
  check_id(het);
  const auto& tv = nodes_[t.id].value;
  const auto& av = nodes_[hom.id].value;
  const auto& bv = nodes_[het.id].value;
  if (!tv.same_shape(av) || !tv.same_shape(bv)) {
    throw ShapeError("gate_combine: gate " + shape_str(tv) + ", hom " + shape_str(av) + ", het " +
                     shape_str(bv));
  }
  Node n;
  n.op = OpKind::GateCombine;
  n.inputs = {t.id, hom.id, het.id};
  n.requires_grad = nodes_[t.id].requires_grad || nodes_[hom.id].requires_grad ||
                    nodes_[het.id].requires_grad;
  n.value = DenseMatrix(tv.rows(), tv.cols());
  for (std::size_t i = 0; i < tv.size(); ++i) {
    const double g = tv.data()[i];
    n.value.data()[i] = g * av.data()[i] + (1.0 - g) * bv.data()[i];
  }
  return push(std::move(n));
}

VarId Tape::dropout(VarId h, double p, bool training, Rng& rng) {
  check_id(h);
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: probability must lie in [0, 1)");
  if (!training || p == 0.0) return h;
  const auto& hv = nodes_[h.id].value;
  Node n;
  n.op = OpKind::Dropout;
  n.inputs = {h.id};
  n.requires_grad = nodes_[h.id].requires_grad;
  n.saved = DenseMatrix(hv.rows(), hv.cols());
  const double scale = 1.0 / (1.0 - p);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  // Zero entries of a constant input stay zero and carry no gradient, so they
  // need no draw. Sparse bag-of-words features make this the common case.
  const bool skip_zeros = !n.requires_grad;
  for (std::size_t i = 0; i < hv.size(); ++i) {
    if (skip_zeros && hv.data()[i] == 0.0) continue;
    n.saved.data()[i] = unif(rng) < p ? 0.0 : scale;
  }
  n.value = hv;
  for (std::size_t i = 0; i < hv.size(); ++i) n.value.data()[i] *= n.saved.data()[i];
  return push(std::move(n));
}

VarId Tape::masked_softmax_cross_entropy(VarId logits, std::span<const int> labels,
                                         std::span<const std::size_t> mask) {
  check_id(logits);
  const auto& lv = nodes_[logits.id].value;
  if (mask.empty()) throw ConfigError("masked_softmax_cross_entropy: empty mask");
  if (labels.size() != lv.rows()) {
    throw ShapeError("masked_softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(lv.rows()) + " rows");
  }
  for (std::size_t node : mask) {
    if (node >= lv.rows()) throw ConfigError("masked_softmax_cross_entropy: mask index out of range");
    if (labels[node] < 0 || static_cast<std::size_t>(labels[node]) >= lv.cols()) {
      throw ConfigError("masked_softmax_cross_entropy: node " + std::to_string(node) +
                        " has invalid label " + std::to_string(labels[node]));
    }
  }
  Node n;
  n.op = OpKind::SoftmaxCrossEntropy;
  n.inputs = {logits.id};
  n.requires_grad = nodes_[logits.id].requires_grad;
  n.labels.assign(labels.begin(), labels.end());
  n.mask.assign(mask.begin(), mask.end());
  auto [probs, loss] = softmax_xent(lv, n.labels, n.mask);
  n.saved = std::move(probs);
  n.value = DenseMatrix(1, 1, loss);
  return push(std::move(n));
}

VarId Tape::sum(VarId h) {
  check_id(h);
  Node n;
  n.op = OpKind::Sum;
  n.inputs = {h.id};
  n.requires_grad = nodes_[h.id].requires_grad;
  double acc = 0.0;
  for (double v : nodes_[h.id].value.data()) acc += v;
  n.value = DenseMatrix(1, 1, acc);
  return push(std::move(n));
}

DenseMatrix Tape::replay(std::size_t id) const {
  const Node& n = nodes_.at(id);
  auto in = [&](std::size_t i) -> const DenseMatrix& { return nodes_[n.inputs[i]].value; };
  switch (n.op) {
    case OpKind::Param:
    case OpKind::Constant:
      return n.value;
    case OpKind::MatMul:
      return ghnet::matmul(in(0), in(1));
    case OpKind::SpmmConst:
      return ghnet::spmm(*n.filter, in(0));
    case OpKind::AddBias: {
      DenseMatrix out = in(0);
      for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += in(1)(0, c);
      return out;
    }
    case OpKind::Relu: {
      DenseMatrix out = in(0);
      for (double& v : out.data()) v = v < 0.0 ? 0.0 : v;
      return out;
    }
    case OpKind::Sigmoid: {
      DenseMatrix out = in(0);
      for (double& v : out.data()) v = sigmoid_scalar(v);
      return out;
    }
    case OpKind::Hadamard: {
      DenseMatrix out = in(0);
      for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= in(1).data()[i];
      return out;
    }
    case OpKind::GateCombine: {
      DenseMatrix out(in(0).rows(), in(0).cols());
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double g = in(0).data()[i];
        out.data()[i] = g * in(1).data()[i] + (1.0 - g) * in(2).data()[i];
      }
      return out;
    }
    case OpKind::Dropout: {
      DenseMatrix out = in(0);
      for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= n.saved.data()[i];
      return out;
    }
    case OpKind::SoftmaxCrossEntropy:
      return DenseMatrix(1, 1, softmax_xent(in(0), n.labels, n.mask).second);
    case OpKind::Sum: {
      double acc = 0.0;
      for (double v : in(0).data()) acc += v;
      return DenseMatrix(1, 1, acc);
    }
  }
  return {};
}

void Tape::backward(VarId loss, ParamStore& params) const {
  check_id(loss);
  if (loss.rows != 1 || loss.cols != 1) throw ShapeError("backward: loss must be a 1x1 scalar");

  std::vector<DenseMatrix> grads(loss.id + 1);
  grads[loss.id] = DenseMatrix(1, 1, 1.0);

  for (std::size_t id = loss.id + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.requires_grad || grads[id].size() == 0) continue;
    const DenseMatrix& g = grads[id];

    if (n.op == OpKind::Param) {
      Parameter& p = params[n.param_index];
      if (!p.value.same_shape(g)) throw ShapeError("backward: gradient shape mismatch for " + p.name);
      add_into(p.grad, g);
      continue;
    }

    const double fault =
        options_.corrupt_backward == n.op ? options_.corrupt_scale : 1.0;
    auto emit = [&](std::size_t slot, DenseMatrix delta) {
      const std::size_t target = n.inputs[slot];
      if (!nodes_[target].requires_grad) return;
      if (fault != 1.0)
        for (double& v : delta.data()) v *= fault;
      add_into(grads[target], delta);
    };
    auto wants = [&](std::size_t slot) { return nodes_[n.inputs[slot]].requires_grad; };
    auto in = [&](std::size_t slot) -> const DenseMatrix& { return nodes_[n.inputs[slot]].value; };

    switch (n.op) {
      case OpKind::Param:
      case OpKind::Constant:
        break;
      case OpKind::MatMul:
        if (wants(0)) emit(0, matmul_nt(g, in(1)));
        if (wants(1)) emit(1, matmul_tn(in(0), g));
        break;
      case OpKind::SpmmConst: {
        // sᵀ·g by scattering rows; for a symmetric filter this equals s·g.
        const CsrMatrix& s = *n.filter;
        const std::size_t m = g.cols();
        DenseMatrix dh(s.num_cols(), m);
        for (std::size_t r = 0; r < s.num_rows(); ++r) {
          auto cols = s.row_cols(r);
          auto vals = s.row_values(r);
          const double* src = g.data().data() + r * m;
          for (std::size_t p = 0; p < cols.size(); ++p) {
            double* dst = dh.data().data() + cols[p] * m;
            for (std::size_t j = 0; j < m; ++j) dst[j] += vals[p] * src[j];
          }
        }
        emit(0, std::move(dh));
        break;
      }
      case OpKind::AddBias: {
        if (wants(0)) emit(0, g);
        if (wants(1)) {
          DenseMatrix db(1, g.cols());
          for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) db(0, c) += g(r, c);
          emit(1, std::move(db));
        }
        break;
      }
      case OpKind::Relu: {
        DenseMatrix dh = g;
        for (std::size_t i = 0; i < dh.size(); ++i)
          if (!(in(0).data()[i] > 0.0)) dh.data()[i] = 0.0;
        emit(0, std::move(dh));
        break;
      }
      case OpKind::Sigmoid: {
        DenseMatrix dh = g;
        for (std::size_t i = 0; i < dh.size(); ++i) {
          const double y = n.value.data()[i];
          dh.data()[i] *= y * (1.0 - y);
        }
        emit(0, std::move(dh));
        break;
      }
      case OpKind::Hadamard: {
        if (wants(0)) {
          DenseMatrix da = g;
          for (std::size_t i = 0; i < da.size(); ++i) da.data()[i] *= in(1).data()[i];
          emit(0, std::move(da));
        }
        if (wants(1)) {
          DenseMatrix db = g;
          for (std::size_t i = 0; i < db.size(); ++i) db.data()[i] *= in(0).data()[i];
          emit(1, std::move(db));
        }
        break;
      }
      case OpKind::GateCombine: {
        const auto& t = in(0).data();
        const auto& a = in(1).data();
        const auto& b = in(2).data();
        if (wants(0)) {
          DenseMatrix dt = g;
          for (std::size_t i = 0; i < dt.size(); ++i) dt.data()[i] *= a[i] - b[i];
          emit(0, std::move(dt));
        }
        if (wants(1)) {
          DenseMatrix da = g;
          for (std::size_t i = 0; i < da.size(); ++i) da.data()[i] *= t[i];
          emit(1, std::move(da));
        }
        if (wants(2)) {
          DenseMatrix db = g;
          for (std::size_t i = 0; i < db.size(); ++i) db.data()[i] *= 1.0 - t[i];
          emit(2, std::move(db));
        }
        break;
      }
      case OpKind::Dropout: {
        DenseMatrix dh = g;
        for (std::size_t i = 0; i < dh.size(); ++i) dh.data()[i] *= n.saved.data()[i];
        emit(0, std::move(dh));
        break;
      }
      case OpKind::SoftmaxCrossEntropy: {
        const auto& logits = in(0);
        DenseMatrix dl(logits.rows(), logits.cols());
        const double scale = g(0, 0) / static_cast<double>(n.mask.size());
        for (std::size_t node : n.mask) {
          auto prow = n.saved.row(node);
          auto drow = dl.row(node);
          for (std::size_t c = 0; c < drow.size(); ++c) drow[c] += scale * prow[c];
          drow[static_cast<std::size_t>(n.labels[node])] -= scale;
        }
        emit(0, std::move(dl));
        break;
      }
      case OpKind::Sum: {
        const auto& src = in(0);
        emit(0, DenseMatrix(src.rows(), src.cols(), g(0, 0)));
        break;
      }
    }
  }
}

}  // namespace ghnet
