// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vdp/adam.hpp"
#include "vdp/tape.hpp"

namespace vdp::diff {

// Scalar-valued function of the current leaf values. Implementations must
// rebuild the graph from scratch on every call (fresh Tape) so finite
// differences see the perturbed values.
using ScalarFn = std::function<double()>;

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_leaf;
  int64_t worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  int64_t probes = 0;
};

struct GradCheckOptions {
  // Probes per leaf. Coordinates are drawn without replacement when the leaf
  // is small enough, otherwise sampled uniformly. <=0 means every coordinate.
  int probe_count = 16;
  double step_scale = 1e-3;  // h = step_scale * max(1, |x|), rounded to float
  uint64_t seed = 0x9e3779b97f4a7c15ull;
};

// Compares analytic leaf gradients against central finite differences of `f`.
// `analytic_grads` must already hold the gradients of f at the current point
// (one tensor per leaf, same order as `params.leaves`). Leaf values are
// perturbed in place and restored exactly.
GradCheckResult grad_check(const ScalarFn& f, ParamSet& params,
                           const std::vector<Tensor>& analytic_grads,
                           const GradCheckOptions& opts = {});

// Convenience: runs forward+backward via `build` to collect analytic grads,
// then probes. `build` must zero nothing itself; leaves are zeroed here.
GradCheckResult grad_check_fn(const std::function<double(bool with_grad)>& build,
                              ParamSet& params, const GradCheckOptions& opts = {});

}  // namespace vdp::diff
