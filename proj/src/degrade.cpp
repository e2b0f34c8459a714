// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0

#include "vdp/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vdp/errors.hpp"
#include "vdp/losses.hpp"
#include "vdp/rng.hpp"

namespace vdp::degrade {

namespace {

constexpr uint64_t kGaussStream = 0x6a55;
constexpr uint64_t kPoissonStream = 0x9015;
constexpr uint64_t kReplaceStream = 0x4e01;

float clip01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

const char* kind_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::gaussian: return "gaussian";
    case NoiseKind::poisson: return "poisson";
    case NoiseKind::frame_replace: return "frame_replace";
    case NoiseKind::downscale: return "downscale";
  }
  return "unknown";
}

NoiseKind kind_from_name(const std::string& name) {
  if (name == "gaussian") return NoiseKind::gaussian;
  if (name == "poisson") return NoiseKind::poisson;
  if (name == "frame_replace") return NoiseKind::frame_replace;
  if (name == "downscale") return NoiseKind::downscale;
  throw ConfigError("unknown noise kind '" + name +
                    "' (expected gaussian, poisson, frame_replace, or downscale)");
}

void NoiseSpec::validate(int t) const {
  switch (kind) {
    case NoiseKind::gaussian:
      if (!(sigma > 0.0)) throw ConfigError("gaussian noise requires sigma > 0");
      break;
    case NoiseKind::poisson:
      if (!(lambda > 0.0)) throw ConfigError("poisson noise requires lambda > 0");
      break;
    case NoiseKind::frame_replace:
      if (frames.empty()) throw ConfigError("frame_replace requires at least one frame index");
      for (int idx : frames)
        if (idx < 0 || idx >= t)
          throw ConfigError("frame_replace index " + std::to_string(idx) +
                            " out of range for " + std::to_string(t) + " frames");
      break;
    case NoiseKind::downscale:
      if (scale < 1) throw ConfigError("downscale requires scale >= 1");
      break;
  }
}

std::string NoiseSpec::str() const {
  std::ostringstream os;
  os << kind_name(kind) << "(";
  switch (kind) {
    case NoiseKind::gaussian: os << "sigma=" << sigma << ", seed=" << seed; break;
    case NoiseKind::poisson: os << "lambda=" << lambda << ", seed=" << seed; break;
    case NoiseKind::frame_replace: {
      os << "frames=[";
      for (size_t i = 0; i < frames.size(); ++i) os << (i ? "," : "") << frames[i];
      os << "], seed=" << seed;
      break;
    }
    case NoiseKind::downscale: os << "scale=" << scale; break;
  }
  os << ")";
  return os.str();
}

VideoSequence add_gaussian(const VideoSequence& v, double sigma, uint64_t seed) {
  if (!(sigma > 0.0)) throw ConfigError("add_gaussian: sigma must be > 0");
  v.validate();
  Rng rng(Rng::mix(seed, kGaussStream));
  VideoSequence out = v;
  const double s = sigma / 255.0;
  for (Tensor& f : out.frames)
    for (int64_t i = 0; i < f.numel(); ++i) f[i] = clip01(f[i] + s * rng.normal());
  return out;
}

VideoSequence add_poisson(const VideoSequence& v, double lambda, uint64_t seed) {
  if (!(lambda > 0.0)) throw ConfigError("add_poisson: lambda must be > 0");
  v.validate();
  Rng rng(Rng::mix(seed, kPoissonStream));
  VideoSequence out = v;
  for (Tensor& f : out.frames)
    for (int64_t i = 0; i < f.numel(); ++i)
      f[i] = clip01(f[i] + (static_cast<double>(rng.poisson(lambda)) - lambda) / 255.0);
  return out;
}

VideoSequence replace_frame_with_noise(const VideoSequence& v, int idx, uint64_t seed) {
  v.validate();
  if (idx < 0 || idx >= v.t())
    throw ConfigError("replace_frame_with_noise: index " + std::to_string(idx) +
                      " out of range for " + std::to_string(v.t()) + " frames");
  Rng rng(Rng::mix(seed, kReplaceStream ^ static_cast<uint64_t>(idx)));
  VideoSequence out = v;
  Tensor& f = out.frames[static_cast<size_t>(idx)];
  for (int64_t i = 0; i < f.numel(); ++i) f[i] = static_cast<float>(rng.uniform01());
  return out;
}

VideoSequence make_lowres(const VideoSequence& v, int scale) {
  v.validate();
  if (scale < 1) throw ConfigError("make_lowres: scale must be >= 1");
  VideoSequence out;
  out.filenames = v.filenames;
  out.bit_depth = v.bit_depth;
  for (const Tensor& f : v.frames) out.frames.push_back(losses::downsample(f, scale));
  return out;
}

VideoSequence apply(const VideoSequence& v, const NoiseSpec& spec) {
  spec.validate(v.t());
  switch (spec.kind) {
    case NoiseKind::gaussian: return add_gaussian(v, spec.sigma, spec.seed);
    case NoiseKind::poisson: return add_poisson(v, spec.lambda, spec.seed);
    case NoiseKind::frame_replace: {
      VideoSequence out = v;
      for (int idx : spec.frames) out = replace_frame_with_noise(out, idx, spec.seed);
      return out;
    }
    case NoiseKind::downscale: return make_lowres(v, spec.scale);
  }
  throw ConfigError("apply: unhandled noise kind");
}

}  // namespace vdp::degrade
