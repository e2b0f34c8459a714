// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0

#include "vdp/adam.hpp"

#include <cmath>

#include "vdp/errors.hpp"

namespace vdp::diff {

Adam::Adam(ParamSet& params, AdamConfig cfg) : params_(&params), cfg_(cfg) {
  m_.reserve(params.leaves.size());
  v_.reserve(params.leaves.size());
  for (const ParamLeaf* p : params.leaves) {
    m_.push_back(Tensor::zeros(p->value.shape()));
    v_.push_back(Tensor::zeros(p->value.shape()));
  }
}

void Adam::step() {
  for (const ParamLeaf* p : params_->leaves)
    if (!p->grad.all_finite())
      throw NumericError("adam: non-finite gradient in parameter '" + p->name + "'");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t li = 0; li < params_->leaves.size(); ++li) {
    ParamLeaf& p = *params_->leaves[li];
    Tensor& m = m_[li];
    Tensor& v = v_[li];
    const int64_t n = p.value.numel();
    for (int64_t i = 0; i < n; ++i) {
      const double g = p.grad[i];
      const double mi = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      const double vi = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      p.value[i] = static_cast<float>(p.value[i] - cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
    }
  }
}

}  // namespace vdp::diff
