// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "vdp/tensor.hpp"

namespace vdp::videoio {

// Frame sequence in [0,1], all frames the same [C,H,W] shape.
struct VideoSequence {
  std::vector<Tensor> frames;
  std::vector<std::string> filenames;  // source metadata, parallel to frames
  int bit_depth = 8;

  int t() const { return static_cast<int>(frames.size()); }
  const Shape& frame_shape() const;
  void validate() const;  // same shapes, T >= 1, values in [0,1]
};

// Per-frame binary single-channel masks, [1,H,W]; 1 = observed, 0 = hole.
struct MaskSequence {
  std::vector<Tensor> masks;
  bool stationary = false;  // true when replicated from a single mask.png

  int t() const { return static_cast<int>(masks.size()); }
  void validate_against(const VideoSequence& v) const;
};

// Loads dir/frame_%05d.png (8-bit RGB, contiguous indices from 0) as p/255.
VideoSequence load_frames(const std::string& dir);

// Writes dir/frame_%05d.png with round-half-up 8-bit quantization.
// Values outside [0,1] are rejected; clip before calling.
void save_frames(const VideoSequence& v, const std::string& dir);

// Loads either dir/mask.png (stationary; replicated to length t) or
// dir/mask_%05d.png for every frame. 8-bit gray, thresholded at 128.
MaskSequence load_masks(const std::string& dir, int t);

// Single-image helpers (8-bit). Gray pixels are raw bytes, row-major.
void save_gray_png(const std::string& path, int w, int h,
                   const std::vector<unsigned char>& pixels);
Tensor load_frame_png(const std::string& path);           // [3,H,W] in [0,1]
void save_frame_png(const std::string& path, const Tensor& frame);

}  // namespace vdp::videoio
