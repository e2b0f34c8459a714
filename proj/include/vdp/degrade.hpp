// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "vdp/videoio.hpp"

namespace vdp::degrade {

using videoio::VideoSequence;

enum class NoiseKind { gaussian, poisson, frame_replace, downscale };

const char* kind_name(NoiseKind k);
NoiseKind kind_from_name(const std::string& name);  // throws ConfigError

// Serializable corruption description; recorded verbatim for provenance.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::gaussian;
  double sigma = 20.0;       // gaussian std dev in [0,255] units
  double lambda = 25.0;      // poisson intensity in [0,255] units
  std::vector<int> frames;   // frame_replace targets
  int scale = 4;             // downscale factor
  uint64_t seed = 0;

  void validate(int t) const;  // throws ConfigError
  std::string str() const;     // e.g. "gaussian(sigma=20, seed=0)"
};

// y = clip(x + n/255), n ~ N(0, sigma^2) i.i.d. per pixel.
VideoSequence add_gaussian(const VideoSequence& v, double sigma, uint64_t seed);

// y = clip(x + (P(lambda) - lambda)/255), centered additive Poisson noise.
VideoSequence add_poisson(const VideoSequence& v, double lambda, uint64_t seed);

// Replaces frame idx with i.i.d. uniform(0,1) pixels; others copied as-is.
VideoSequence replace_frame_with_noise(const VideoSequence& v, int idx, uint64_t seed);

// Area-average downscale of every frame (bit-exact with the loss downsampler).
VideoSequence make_lowres(const VideoSequence& v, int scale);

// Dispatches on spec.kind.
VideoSequence apply(const VideoSequence& v, const NoiseSpec& spec);

}  // namespace vdp::degrade
