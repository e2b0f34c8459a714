// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "vdp/tape.hpp"

namespace vdp::losses {

using diff::Tape;
using diff::Var;

// Kernel used by the multi-scale downsampler. Area averaging is the
// default; the cubic kernel is available behind this switch.
enum class DownKernel { area, cubic };

struct LossWeights {
  double rec = 1.0;
  double spl = 1e-4;
  double var = 1e-4;

  void validate() const;  // all >= 0, at least one > 0

  static LossWeights denoise() { return {1.0, 1e-4, 1e-4}; }
  static LossWeights interpolation() { return {1.0, 1e-4, 1e-4}; }
  static LossWeights superres() { return {1.0, 0.01, 1e-4}; }
  static LossWeights removal() { return {1.0, 0.01, 1e-4}; }
};

struct PyramidSpec {
  std::vector<int> factors{2, 4, 8};
  DownKernel kernel = DownKernel::area;

  // Throws ShapeError (suggesting padding) unless every factor divides both
  // frame dimensions; factors must be >= 1.
  void validate(int h, int w) const;
};

// Fixed (non-trainable) convolutional feature map with one tap per block.
// Each block is a stride-1 odd-kernel convolution + LeakyReLU followed by an
// area 2x pool whenever both spatial dims are even (the pool is skipped on
// odd extents so features exist for any frame size).
class FeatureExtractor {
 public:
  static constexpr uint64_t kDefaultSeed = 17;

  // Fixed-seed random 3-block network, channels 8 -> 16 -> 32.
  static FeatureExtractor random_features(int in_channels, uint64_t seed = kDefaultSeed);
  // Imports externally exported weights (tensor-archive format, stem "phi").
  static FeatureExtractor from_dir(const std::string& dir, int in_channels);
  static FeatureExtractor none();  // disabled: rec_loss falls back to plain L1

  bool enabled() const { return !conv_w_.empty(); }
  int in_channels() const { return in_channels_; }
  int tap_count() const { return static_cast<int>(conv_w_.size()); }
  const std::string& provenance() const { return provenance_; }

  void export_to(const std::string& dir) const;

  // Differentiable taps through x; weights enter the graph as constants.
  std::vector<Var> taps(Tape& t, Var x) const;
  // Taps of a plain tensor, evaluated on a scratch tape.
  std::vector<Tensor> taps_value(const Tensor& x) const;

 private:
  int in_channels_ = 0;
  std::vector<Tensor> conv_w_, conv_b_;
  std::string provenance_ = "disabled";
};

// Deterministic area/cubic downsampler (the same code path the losses use).
Var downsample(Tape& t, Var x, int factor, DownKernel kernel = DownKernel::area);
Tensor downsample(const Tensor& x, int factor, DownKernel kernel = DownKernel::area);

// Mean-L1 plus per-tap mean-L1 feature distance.
Var rec_loss(Tape& t, Var x, Var xhat, const FeatureExtractor& phi);

// Sum over scales of mean-L1 between downsampled pairs.
Var pyramid_loss(Tape& t, Var x, Var xhat, const PyramidSpec& spec);

// Anisotropic L1 total variation over the interior grid, normalized by the
// element count.
Var variation_loss(Tape& t, Var xhat);

// Weighted sum over time of rec + pyramid + variation terms.
Var final_loss(Tape& t, const std::vector<Var>& video, const std::vector<Var>& rollout,
               const LossWeights& w, const FeatureExtractor& phi, const PyramidSpec& spec);

// Precomputed per-target data so fitting loops do not re-run the feature
// network on constant frames every epoch.
struct FrameTarget {
  Tensor x;
  std::vector<Tensor> taps;
};
FrameTarget make_target(const Tensor& x, const FeatureExtractor& phi);

// rec_loss against a fixed target whose feature taps were precomputed by
// make_target with the same extractor. Value-identical to rec_loss on a
// constant of target.x.
Var rec_loss_to_target(Tape& t, const FrameTarget& target, Var xhat,
                       const FeatureExtractor& phi);
Var final_loss_to_targets(Tape& t, const std::vector<FrameTarget>& video,
                          const std::vector<Var>& rollout, const LossWeights& w,
                          const FeatureExtractor& phi, const PyramidSpec& spec);

// Super-resolution objective: rec/pyramid compare the low-res input against
// the downscaled prediction; variation applies at full resolution.
Var sr_loss(Tape& t, Var x_lr, Var xhat_hr, int scale, const LossWeights& w,
            const FeatureExtractor& phi, const PyramidSpec& spec,
            DownKernel dsc_kernel = DownKernel::area);

// Object-removal objective: rec/pyramid compare masked frames; variation
// applies to the full prediction. The mask is binary, [H,W] or [1,H,W] or
// one entry per channel, and never differentiated through.
Var removal_loss(Tape& t, Var x, const Tensor& mask, Var xhat, const LossWeights& w,
                 const FeatureExtractor& phi, const PyramidSpec& spec);

}  // namespace vdp::losses
