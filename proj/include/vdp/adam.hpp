// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "vdp/tape.hpp"

namespace vdp::diff {

// A ParamSet is the owning collection of trainable leaves for one model.
// Leaves are stored behind stable pointers so Tape::param can reference them.
struct ParamSet {
  std::vector<ParamLeaf*> leaves;

  void add(ParamLeaf& leaf) { leaves.push_back(&leaf); }
  void zero_grad() {
    for (ParamLeaf* p : leaves)
      for (int64_t i = 0; i < p->grad.numel(); ++i) p->grad[i] = 0.0f;
  }
  int64_t count() const {
    int64_t n = 0;
    for (const ParamLeaf* p : leaves) n += p->value.numel();
    return n;
  }
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-leaf first/second moment state plus the shared step counter.
class Adam {
 public:
  Adam(ParamSet& params, AdamConfig cfg = {});

  // One update from the gradients currently held in the leaves.
  // Throws NumericError naming the offending leaf if any gradient is not finite.
  void step();

  int64_t t() const { return t_; }
  AdamConfig& config() { return cfg_; }

 private:
  ParamSet* params_;
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace vdp::diff
