// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "vdp/degrade.hpp"
#include "vdp/errors.hpp"
#include "vdp/losses.hpp"

using vdp::ConfigError;
using vdp::Rng;
using vdp::Shape;
using vdp::Tensor;
using namespace vdp::degrade;

namespace {

VideoSequence gray_video(int t, int h, int w, float value = 0.5f) {
  VideoSequence v;
  for (int i = 0; i < t; ++i) v.frames.push_back(Tensor::full(Shape{3, h, w}, value));
  return v;
}

VideoSequence random_video(int t, int h, int w, uint64_t seed) {
  VideoSequence v;
  Rng rng(seed);
  for (int i = 0; i < t; ++i) {
    Tensor f(Shape{3, h, w});
    for (int64_t k = 0; k < f.numel(); ++k) f[k] = static_cast<float>(rng.uniform01());
    v.frames.push_back(std::move(f));
  }
  return v;
}

double video_psnr(const VideoSequence& a, const VideoSequence& b) {
  double mse = 0.0;
  for (int i = 0; i < a.t(); ++i)
    mse += vdp::oracle::mse_ref(a.frames[static_cast<size_t>(i)],
                                b.frames[static_cast<size_t>(i)]);
  mse /= a.t();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace

TEST_SUITE_BEGIN("degrade");

TEST_CASE("gaussian noise level matches its analytic PSNR") {
  VideoSequence clean = gray_video(3, 64, 64);
  VideoSequence noisy = add_gaussian(clean, 20.0, 1);
  // 20*log10(255/20) = 22.11 dB; clipping is negligible at mid-gray.
  CHECK(video_psnr(clean, noisy) == doctest::Approx(22.11).epsilon(0.01));

  for (const Tensor& f : noisy.frames)
    for (int64_t i = 0; i < f.numel(); ++i) {
      CHECK(f[i] >= 0.0f);
      CHECK(f[i] <= 1.0f);
    }
}

TEST_CASE("gaussian noise is seed-deterministic") {
  VideoSequence clean = random_video(2, 16, 16, 3);
  VideoSequence a = add_gaussian(clean, 20.0, 7);
  VideoSequence b = add_gaussian(clean, 20.0, 7);
  VideoSequence c = add_gaussian(clean, 20.0, 8);
  bool same = true, diff = false;
  for (int i = 0; i < 2; ++i)
    for (int64_t k = 0; k < a.frames[0].numel(); ++k) {
      same = same && a.frames[i][k] == b.frames[i][k];
      diff = diff || a.frames[i][k] != c.frames[i][k];
    }
  CHECK(same);
  CHECK(diff);
  CHECK_THROWS_AS(add_gaussian(clean, 0.0, 1), ConfigError);
}

TEST_CASE("poisson noise has the centered-additive variance") {
  VideoSequence clean = gray_video(1, 1000, 1000);
  const double lambda = 25.0;
  VideoSequence noisy = add_poisson(clean, lambda, 5);
  double sum = 0.0, sq = 0.0;
  const Tensor& f = noisy.frames[0];
  for (int64_t i = 0; i < f.numel(); ++i) {
    const double d = static_cast<double>(f[i]) - 0.5;
    sum += d;
    sq += d * d;
  }
  const double n = static_cast<double>(f.numel());
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  const double want = lambda / (255.0 * 255.0);
  CHECK(std::abs(mean) < 1e-4);           // centered
  CHECK(std::abs(var - want) / want < 0.02);
}

TEST_CASE("poisson noise vanishes in the small-intensity limit") {
  VideoSequence clean = random_video(2, 8, 8, 9);
  VideoSequence noisy = add_poisson(clean, 1e-12, 3);
  for (int i = 0; i < 2; ++i)
    for (int64_t k = 0; k < clean.frames[0].numel(); ++k)
      CHECK(noisy.frames[i][k] == clean.frames[i][k]);
  CHECK_THROWS_AS(add_poisson(clean, 0.0, 1), ConfigError);
}

TEST_CASE("stronger corruption strictly lowers PSNR") {
  VideoSequence clean = gray_video(2, 64, 64);
  const double g10 = video_psnr(clean, add_gaussian(clean, 10.0, 2));
  const double g20 = video_psnr(clean, add_gaussian(clean, 20.0, 2));
  const double g40 = video_psnr(clean, add_gaussian(clean, 40.0, 2));
  CHECK(g10 > g20);
  CHECK(g20 > g40);
  const double p10 = video_psnr(clean, add_poisson(clean, 10.0, 2));
  const double p25 = video_psnr(clean, add_poisson(clean, 25.0, 2));
  const double p50 = video_psnr(clean, add_poisson(clean, 50.0, 2));
  CHECK(p10 > p25);
  CHECK(p25 > p50);
}

TEST_CASE("frame replacement touches only its target and decorrelates it") {
  VideoSequence clean = random_video(3, 128, 128, 21);
  VideoSequence rep = replace_frame_with_noise(clean, 1, 4);
  for (int i : {0, 2})
    for (int64_t k = 0; k < clean.frames[0].numel(); ++k)
      CHECK(rep.frames[i][k] == clean.frames[i][k]);

  bool changed = false;
  for (int64_t k = 0; k < clean.frames[0].numel() && !changed; ++k)
    changed = rep.frames[1][k] != clean.frames[1][k];
  CHECK(changed);

  // The replaced frame shares essentially no information with its neighbors.
  CHECK(vdp::oracle::nmi_ref(rep.frames[1], rep.frames[0]) < 0.1);
  CHECK(vdp::oracle::nmi_ref(rep.frames[1], rep.frames[2]) < 0.1);

  VideoSequence rep2 = replace_frame_with_noise(clean, 1, 4);
  for (int64_t k = 0; k < clean.frames[0].numel(); ++k)
    CHECK(rep.frames[1][k] == rep2.frames[1][k]);

  CHECK_THROWS_AS(replace_frame_with_noise(clean, 3, 1), ConfigError);
  CHECK_THROWS_AS(replace_frame_with_noise(clean, -1, 1), ConfigError);
}

TEST_CASE("low-resolution generation matches the loss downsampler bit-exactly") {
  VideoSequence clean = random_video(2, 16, 16, 31);
  VideoSequence same = make_lowres(clean, 1);
  for (int i = 0; i < 2; ++i)
    for (int64_t k = 0; k < clean.frames[0].numel(); ++k)
      CHECK(same.frames[i][k] == clean.frames[i][k]);

  VideoSequence lr = make_lowres(clean, 4);
  for (int i = 0; i < 2; ++i) {
    Tensor want = vdp::losses::downsample(clean.frames[static_cast<size_t>(i)], 4);
    CHECK(lr.frames[i].shape() == Shape{3, 4, 4});
    for (int64_t k = 0; k < want.numel(); ++k) CHECK(lr.frames[i][k] == want[k]);
  }

  // The paper-scale geometry: 448x256 quarters to 112x64.
  VideoSequence big = random_video(1, 256, 448, 32);
  VideoSequence small = make_lowres(big, 4);
  CHECK(small.frames[0].shape() == Shape{3, 64, 112});

  CHECK_THROWS_AS(make_lowres(clean, 5), vdp::ShapeError);  // 16 % 5 != 0
}

TEST_CASE("noise specs validate, serialize, and dispatch") {
  NoiseSpec g;
  g.kind = NoiseKind::gaussian;
  g.sigma = 20.0;
  g.seed = 9;
  CHECK(g.str() == "gaussian(sigma=20, seed=9)");
  CHECK_NOTHROW(g.validate(3));
  g.sigma = -1.0;
  CHECK_THROWS_AS(g.validate(3), ConfigError);

  NoiseSpec r;
  r.kind = NoiseKind::frame_replace;
  r.frames = {1};
  CHECK(r.str() == "frame_replace(frames=[1], seed=0)");
  CHECK_NOTHROW(r.validate(3));
  r.frames = {5};
  CHECK_THROWS_AS(r.validate(3), ConfigError);
  r.frames.clear();
  CHECK_THROWS_AS(r.validate(3), ConfigError);

  CHECK(kind_from_name("poisson") == NoiseKind::poisson);
  CHECK_THROWS_AS(kind_from_name("salt"), ConfigError);
  CHECK(std::string(kind_name(NoiseKind::downscale)) == "downscale");

  VideoSequence clean = random_video(3, 16, 16, 41);
  NoiseSpec spec;
  spec.kind = NoiseKind::frame_replace;
  spec.frames = {1};
  spec.seed = 4;
  VideoSequence via_apply = apply(clean, spec);
  VideoSequence direct = replace_frame_with_noise(clean, 1, 4);
  for (int i = 0; i < 3; ++i)
    for (int64_t k = 0; k < clean.frames[0].numel(); ++k)
      CHECK(via_apply.frames[i][k] == direct.frames[i][k]);
}

TEST_SUITE_END();
