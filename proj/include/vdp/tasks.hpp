// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vdp/losses.hpp"
#include "vdp/model.hpp"
#include "vdp/videoio.hpp"

namespace vdp::tasks {

enum class TaskKind { denoise, interpolate, superres, removal };
const char* kind_name(TaskKind kind);
TaskKind kind_from_name(const std::string& name);

// Loss-subset harness modes mirroring the ablation columns: rec only,
// rec + variation, rec + pyramid, all three.
enum class Ablation { rec_only, rec_var, rec_spl, all };
const char* ablation_name(Ablation a);  // "rec", "rec+var", "rec+spl", "all"
Ablation ablation_from_name(const std::string& name);

struct TaskConfig {
  TaskKind kind = TaskKind::denoise;
  losses::LossWeights weights = losses::LossWeights::denoise();
  int epochs = 3600;
  double lr = 5e-4;
  uint64_t seed = 1;

  // Network size knobs; out_c/out_h/out_w and seed are overwritten from the
  // video and the task seed when fitting starts.
  model::ModelConfig model;

  // Supervise f(z_0) against the first frame so the restored sequence keeps
  // full length. Disabling reverts to the literal objective over z_1.. only.
  bool supervise_frame0 = true;
  Ablation ablate = Ablation::all;
  bool early_stop = false;
  int plateau_window = 100;
  double plateau_tol = 1e-3;

  int scale = 4;                          // super-resolution factor
  std::vector<double> alphas = {0.5};     // interpolation blend points
  losses::DownKernel sr_kernel = losses::DownKernel::area;

  // Perceptual feature taps inside the rec term. Off = plain L1.
  bool use_features = true;
  uint64_t feature_seed = losses::FeatureExtractor::kDefaultSeed;

  // Pyramid scales. Empty = derive automatically: the factors among {2,4,8}
  // that divide the operative frame, or {1} when none do.
  std::vector<int> pyramid_factors;

  // Up-front rejection bound for the per-epoch graph size estimate.
  int64_t max_graph_bytes = 1'500'000'000;

  void validate() const;

  // {1/factor, .., (factor-1)/factor}; factor 4 -> {0.25, 0.5, 0.75}.
  static std::vector<double> alphas_for_factor(int factor);

  // paper-<task> pins the published hyperparameters at full model size;
  // desk-<task> pins reduced sizes and epochs for workstation-scale runs.
  static TaskConfig preset(const std::string& name);
  static std::vector<std::string> preset_names();
};

struct InterpolationRequest {
  std::vector<double> alphas;  // strictly increasing, each in (0,1)

  void validate() const;
  static InterpolationRequest for_factor(int factor);
};

// Everything a fit leaves behind: the trained network, per-epoch loss
// component curves, the restored frames, and the final latent trajectory
// with its frozen batch-norm statistics for post-fit decodes.
struct FitResult {
  std::shared_ptr<model::VdpModel> trained;
  std::vector<double> total_curve, rec_curve, spl_curve, var_curve;
  std::vector<Tensor> frames;        // restored, in decode order
  std::vector<Tensor> latents;       // z_0 .. z_{T-1} values
  int decode_from = 0;               // frames pair with latents[decode_from..]
  std::vector<diff::BnStats> bn_stats;
  double seconds_per_epoch = 0.0;
  std::optional<int> plateau_epoch;  // set when early stopping fired
  bool aborted = false;              // non-finite loss; params are last-good
  int epochs_run = 0;

  // Curves keyed for the CSV layout: total, rec, spl, var.
  std::vector<std::pair<std::string, std::vector<double>>> curves() const;
};

// Per-epoch view handed to the observer after the backward pass: loss
// components (double side-channel values) and the decoded prediction values.
struct EpochInfo {
  int epoch = 0;
  double total = 0.0, rec = 0.0, spl = 0.0, var = 0.0;
  std::vector<Tensor> frames;
};
using EpochObserver = std::function<void(const EpochInfo&)>;

// The per-video optimization loop shared by all tasks: each epoch zeroes
// gradients, rolls the recurrence out from the frozen z_0, builds the task
// objective, backpropagates, and steps Adam. Deterministic for fixed config.
// Masks are required for removal and rejected elsewhere. The observer, when
// set, also triggers per-epoch frame decode copies.
FitResult fit(const videoio::VideoSequence& video, const TaskConfig& cfg,
              const videoio::MaskSequence* masks = nullptr,
              const EpochObserver& observer = {});

// Task front ends. Each fits and assembles the output sequence; when
// fit_out is non-null it additionally receives the full FitResult (loss
// curves, timing, trained model) for reporting.

// Restored sequence (full input length under supervise_frame0).
videoio::VideoSequence denoise(const videoio::VideoSequence& video, TaskConfig cfg,
                               FitResult* fit_out = nullptr);

// Latent-space interpolation: fit, then decode lerped latent pairs under the
// frozen statistics, interleaving endpoints with alpha-ascending
// intermediates. Output length (T-1)*(n_alpha+1)+1.
videoio::VideoSequence interpolate(const videoio::VideoSequence& video, TaskConfig cfg,
                                   const InterpolationRequest& req,
                                   FitResult* fit_out = nullptr);

// Fit the decoder at (H*scale, W*scale) against the low-res input; returns
// the high-res frames.
videoio::VideoSequence superresolve(const videoio::VideoSequence& video_lr, TaskConfig cfg,
                                    int scale, FitResult* fit_out = nullptr);

// Masked fitting; holes are synthesized by the prior. One mask per frame (a
// stationary mask is replicated by videoio).
videoio::VideoSequence remove_object(const videoio::VideoSequence& video, TaskConfig cfg,
                                     const videoio::MaskSequence& masks,
                                     FitResult* fit_out = nullptr);

// First epoch e >= window whose best loss over the trailing window improves
// on the best before it by less than tol (relative); nullopt if never.
std::optional<int> detect_plateau(const std::vector<double>& curve, int window, double tol);

}  // namespace vdp::tasks
