// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "vdp/tensor.hpp"

namespace vdp::diff {

// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// A trainable value: the optimizer reads `grad` and writes `value`.
// Gradients are zeroed between optimization steps (ParamSet::zero_grad).
struct ParamLeaf {
  std::string name;
  Tensor value;
  Tensor grad;

  ParamLeaf() = default;
  ParamLeaf(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape())) {}
};

// Per-channel batch statistics produced by batch_norm.
struct BnStats {
  Tensor mean;  // [C]
  Tensor var;   // [C], biased
};

// Reverse-mode tape. Nodes are recorded define-by-run; backward() runs the
// recorded closures in reverse creation order and accumulates into ParamLeaf
// gradients. A tape is confined to one logical thread.
class Tape {
 public:
  Var constant(Tensor v);
  Var param(ParamLeaf& leaf);

  const Tensor& value(Var v) const { return node(v).value; }
  // Gradient buffer of a node after backward(); empty tensor if untouched.
  const Tensor& grad_of(Var v) const { return node(v).grad; }
  // Scalar value through the double-precision side channel: reductions stash
  // their 64-bit accumulation, and scalar-combining ops propagate it. Falls
  // back to the stored 32-bit value for nodes without one.
  double scalar_f64(Var v) const;

  // Elementwise.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var abs(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var leaky_relu(Var a, double slope = 0.2);
  Var lerp(Var a, Var b, double alpha);  // (1-alpha)*a + alpha*b
  Var detach(Var a);

  // Linear algebra / conv.
  Var linear(Var x, Var w, Var b);  // x:[Din] w:[Dout,Din] b:[Dout]
  Var conv2d(Var x, Var w, Var b, int stride = 1, int padding = 0);

  // Resampling.
  Var upsample_nearest(Var x, int factor);
  Var avg_downsample(Var x, int factor);  // area average, [C,H,W] -> [C,H/f,W/f]
  // Catmull-Rom (a = -0.5) separable downsample with the kernel widened by
  // the factor (antialiased) and edge replication; factor 1 is the identity.
  Var cubic_downsample(Var x, int factor);

  // Normalization over a [T,C,H,W] stack; statistics per channel over T,H,W.
  Var batch_norm(Var x, Var gamma, Var beta, double eps = 1e-5, BnStats* stats_out = nullptr);
  // Affine normalization with externally fixed statistics; x is 3D or 4D.
  Var bn_frozen(Var x, const Tensor& mean, const Tensor& var, Var gamma, Var beta,
                double eps = 1e-5);

  // Structure.
  Var stack(const std::vector<Var>& xs);  // T x [C,H,W] -> [T,C,H,W]
  Var slice_t(Var x, int t);              // [T,C,H,W] -> [C,H,W]
  Var slice_vec(Var x, int begin, int len);
  Var concat_c(Var a, Var b);  // channel concat of [*,H,W]
  Var reshape(Var a, Shape s);

  // Reductions (double accumulation).
  Var sum_all(Var a);
  Var mean_all(Var a);
  Var mean_abs_diff(Var a, Var b);  // mean |a - b|
  // Anisotropic L1 total variation over rows/cols 1..H-1 x 1..W-1 summed over
  // channels, normalized by element count.
  Var tv_l1(Var frame);
  Var add_n(const std::vector<Var>& xs);

  // Runs the reverse sweep from a scalar loss and accumulates parameter
  // gradients into their leaves.
  void backward(Var loss);

  void reset();
  size_t num_nodes() const { return nodes_.size(); }
  // Unique per graph generation; changes on construction and reset() so
  // cached Var bindings can detect staleness.
  uint64_t id() const { return id_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    double f64 = 0.0;  // high-precision scalar channel (valid iff has_f64)
    bool has_f64 = false;
    bool requires_grad = false;
    ParamLeaf* leaf = nullptr;
    std::function<void(Tape&)> backward;
  };

  Node& node(Var v) { return nodes_[static_cast<size_t>(v.id)]; }
  const Node& node(Var v) const { return nodes_[static_cast<size_t>(v.id)]; }
  Var emplace(Tensor value, bool requires_grad);
  // Gradient accumulation buffer, allocated zero on first touch.
  Tensor& gbuf(int id);
  bool needs_grad(Var v) const { return node(v).requires_grad; }

  static uint64_t next_id();

  std::vector<Node> nodes_;
  std::vector<int> param_ids_;
  uint64_t id_ = next_id();
};

// Gate parameters of one LSTM layer: w_ih [4H,Din], w_hh [4H,H], b_ih, b_hh [4H].
// Gate order along the 4H axis is input, forget, cell, output.
struct LstmGateVars {
  Var w_ih, w_hh, b_ih, b_hh;
};

// Canonical LSTM cell update composed from tape primitives:
// sigmoid input/forget/output gates, tanh candidate. Returns (h', c').
std::pair<Var, Var> lstm_cell(Tape& t, Var x, Var h, Var c, const LstmGateVars& p);

}  // namespace vdp::diff
