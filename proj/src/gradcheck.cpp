#include "ghnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace ghnet {

namespace {

double eval_loss(const LossFn& f, const ParamStore& params, TapeOptions options) {
  Tape tape(options);
  VarId loss = f(tape, params);
  return tape.value(loss)(0, 0);
}

}  // namespace

GradCheckResult finite_diff_check(const LossFn& f, ParamStore& params, double h,
                                  TapeOptions options) {
  std::vector<DenseMatrix> saved_grads;
  saved_grads.reserve(params.size());
  for (auto& p : params) saved_grads.push_back(p.grad);

  params.zero_grad();
  {
    Tape tape(options);
    VarId loss = f(tape, params);
    tape.backward(loss, params);
  }

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& values = params[pi].value.data();
    for (std::size_t e = 0; e < values.size(); ++e) {
      const double original = values[e];
      values[e] = original + h;
      const double up = eval_loss(f, params, options);
      values[e] = original - h;
      const double down = eval_loss(f, params, options);
      values[e] = original;

      const double numeric = (up - down) / (2.0 * h);
      const double analytic = params[pi].grad.data()[e];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.entries_checked;
      if (rel > result.max_rel_error || result.worst_param.empty()) {
        result.max_rel_error = std::max(rel, result.max_rel_error);
        result.worst_param = params[pi].name;
        result.worst_index = e;
        result.analytic = analytic;
        result.numeric = numeric;
      }
    }
  }

  for (std::size_t pi = 0; pi < params.size(); ++pi) params[pi].grad = std::move(saved_grads[pi]);
  return result;
}

}  // namespace ghnet
