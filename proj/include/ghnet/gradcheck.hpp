#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ghnet/autodiff.hpp"

namespace ghnet {

// Builds a scalar loss on the given tape from the current parameter values.
// Must be deterministic: no active dropout.
using LossFn = std::function<VarId(Tape&, const ParamStore&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

// Central differences (f(x+h) − f(x−h)) / 2h for every parameter entry
// against the reverse-mode gradient. Relative error per entry uses the
// denominator max(|analytic|, |numeric|, 1e-8). Leaves parameter values and
// gradients as found.
GradCheckResult finite_diff_check(const LossFn& f, ParamStore& params, double h = 1e-6,
                                  TapeOptions options = {});

// One line of the gradient suite report.
struct GradSuiteEntry {
  std::string name;
  GradCheckResult result;
  bool passed = false;
};

// Finite-difference checks of every primitive and every model variant
// end-to-end on a small random graph. `options` is forwarded to each tape so
// negative controls can corrupt a backward rule.
std::vector<GradSuiteEntry> run_gradient_suite(double tolerance = 1e-5, TapeOptions options = {});

}  // namespace ghnet
