// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0

#include "vdp/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vdp/rng.hpp"

namespace vdp::diff {

GradCheckResult grad_check(const ScalarFn& f, ParamSet& params,
                           const std::vector<Tensor>& analytic_grads,
                           const GradCheckOptions& opts) {
  GradCheckResult res;
  Rng rng(opts.seed);
  for (size_t li = 0; li < params.leaves.size(); ++li) {
    ParamLeaf& leaf = *params.leaves[li];
    const Tensor& ga = analytic_grads[li];
    const int64_t n = leaf.value.numel();

    std::vector<int64_t> coords;
    if (opts.probe_count <= 0 || static_cast<int64_t>(opts.probe_count) >= n) {
      coords.resize(static_cast<size_t>(n));
      std::iota(coords.begin(), coords.end(), int64_t{0});
    } else {
      for (int p = 0; p < opts.probe_count; ++p)
        coords.push_back(static_cast<int64_t>(rng.uniform01() * static_cast<double>(n)) % n);
      std::sort(coords.begin(), coords.end());
      coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    }

    for (int64_t idx : coords) {
      const float x0 = leaf.value[idx];
      // Round the step through float so (x0+h)-(x0-h) is exactly 2h in the
      // arithmetic the forward pass actually sees.
      const float h = static_cast<float>(opts.step_scale * std::max(1.0, std::fabs(static_cast<double>(x0))));
      const float xp = x0 + h;
      const float xm = x0 - h;
      leaf.value[idx] = xp;
      const double fp = f();
      leaf.value[idx] = xm;
      const double fm = f();
      leaf.value[idx] = x0;
      const double gf = (fp - fm) / (static_cast<double>(xp) - static_cast<double>(xm));
      const double gan = ga[idx];
      const double denom = std::max({1.0, std::fabs(gan), std::fabs(gf)});
      const double rel = std::fabs(gan - gf) / denom;
      ++res.probes;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_leaf = leaf.name;
        res.worst_index = idx;
        res.analytic = gan;
        res.numeric = gf;
      }
    }
  }
  return res;
}

GradCheckResult grad_check_fn(const std::function<double(bool with_grad)>& build,
                              ParamSet& params, const GradCheckOptions& opts) {
  params.zero_grad();
  build(true);
  std::vector<Tensor> grads;
  grads.reserve(params.leaves.size());
  for (const ParamLeaf* p : params.leaves) grads.push_back(p->grad);
  return grad_check([&build] { return build(false); }, params, grads, opts);
}

}  // namespace vdp::diff
