// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vdp/tensor.hpp"
#include "vdp/videoio.hpp"

namespace vdp::metrics {

// Peak signal-to-noise ratio in dB: 10*log10(peak^2 / MSE), accumulated in
// double. Identical frames (MSE exactly zero) are capped at 99 dB; that is
// the only place the cap applies.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

// Mean local SSIM over channel-averaged grayscale, 11x11 Gaussian window
// (sigma 1.5, normalized), stabilizers C1=(0.01*peak)^2, C2=(0.03*peak)^2.
// Only fully valid windows contribute; frames smaller than the window are
// rejected.
double ssim(const Tensor& a, const Tensor& b, double peak = 1.0);

// Histogram-based normalized mutual information 2*I(A;B)/(H(A)+H(B)) with
// equal-width bins over [0,1] and natural-log entropies. All elements of the
// tensor (every channel) pool into one histogram. Returns 1 when both
// marginal entropies are zero (two constant frames carry identical
// information).
double nmi(const Tensor& a, const Tensor& b, int bins = 64);

// Quality summary for a test video against a reference, plus any named
// per-epoch curves the producing run wants to attach.
struct MetricsReport {
  static constexpr const char* kSchema = "vdp-metrics-v1";

  std::string schema = kSchema;
  std::vector<double> psnr_frames;  // per-frame, test vs reference
  // Empty (with ssim_mean 0) when the frames are smaller than the 11x11
  // SSIM window; the JSON form then omits the ssim block entirely.
  std::vector<double> ssim_frames;
  double psnr_mean = 0.0;
  double ssim_mean = 0.0;
  // nmi_matrix[i][j] = nmi(test frame i, reference frame j); the diagonal is
  // the per-frame score, off-diagonals expose temporal structure.
  std::vector<std::vector<double>> nmi_matrix;
  // Named curves in insertion order (e.g. per-epoch losses). Order is
  // preserved in the CSV; the JSON object sorts keys.
  std::vector<std::pair<std::string, std::vector<double>>> curves;
  // Verbatim text of the configuration that produced the compared frames.
  std::string config_echo;
  // Wall-clock cost of the producing run. Kept out of the persisted JSON by
  // default so repeated runs with the same config serialize bit-identically.
  double runtime_seconds = 0.0;
};

// Per-frame PSNR/SSIM (test[i] vs reference[i]), their means, and the full
// frame-pair NMI matrix. Frame counts and shapes must match.
MetricsReport compare_videos(const videoio::VideoSequence& test,
                             const videoio::VideoSequence& reference);

// Serialize as a stable-schema JSON document. runtime_seconds is included
// only on request (see MetricsReport::runtime_seconds).
void save_json(const MetricsReport& report, const std::filesystem::path& path,
               bool include_runtime = false);
MetricsReport load_json(const std::filesystem::path& path);

// CSV with an epoch index column followed by one column per named curve, in
// vector order. Shorter curves leave trailing cells empty.
void save_curves_csv(const std::vector<std::pair<std::string, std::vector<double>>>& curves,
                     const std::filesystem::path& path);

}  // namespace vdp::metrics
