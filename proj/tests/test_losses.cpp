// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "vdp/errors.hpp"
#include "vdp/grad_check.hpp"
#include "vdp/losses.hpp"
#include "vdp/model.hpp"
#include "vdp/rng.hpp"

using vdp::ConfigError;
using vdp::IoError;
using vdp::Rng;
using vdp::Shape;
using vdp::ShapeError;
using vdp::Tensor;
using vdp::diff::ParamLeaf;
using vdp::diff::ParamSet;
using vdp::diff::Tape;
using vdp::diff::Var;
using namespace vdp::losses;

namespace {

Tensor random_frame(Shape s, uint64_t seed) {
  Rng rng(seed);
  Tensor t(s);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform01());
  return t;
}

double eval_scalar(Var v, Tape& t) { return t.scalar_f64(v); }

}  // namespace

TEST_SUITE_BEGIN("losses");

TEST_CASE("weights validate and carry the task presets") {
  CHECK_NOTHROW(LossWeights{}.validate());
  CHECK_THROWS_AS((LossWeights{-1.0, 0.0, 0.0}.validate()), ConfigError);
  CHECK_THROWS_AS((LossWeights{0.0, 0.0, 0.0}.validate()), ConfigError);

  const LossWeights dn = LossWeights::denoise();
  CHECK(dn.rec == 1.0);
  CHECK(dn.spl == 1e-4);
  CHECK(dn.var == 1e-4);
  const LossWeights in = LossWeights::interpolation();
  CHECK(in.rec == 1.0);
  CHECK(in.spl == 1e-4);
  CHECK(in.var == 1e-4);
  const LossWeights sr = LossWeights::superres();
  CHECK(sr.rec == 1.0);
  CHECK(sr.spl == 0.01);
  CHECK(sr.var == 1e-4);
  const LossWeights rm = LossWeights::removal();
  CHECK(rm.rec == 1.0);
  CHECK(rm.spl == 0.01);
  CHECK(rm.var == 1e-4);
}

TEST_CASE("reconstruction loss vanishes on identical frames") {
  Tensor x = random_frame(Shape{3, 16, 16}, 7);
  FeatureExtractor phi = FeatureExtractor::random_features(3);
  Tape t;
  Var vx = t.constant(x);
  CHECK(eval_scalar(rec_loss(t, vx, vx, phi), t) == 0.0);
}

TEST_CASE("reconstruction loss without features is plain mean L1") {
  Tape t;
  Var x = t.constant(Tensor::zeros(Shape{3, 8, 8}));
  Var xh = t.constant(Tensor::full(Shape{3, 8, 8}, 0.5f));
  CHECK(eval_scalar(rec_loss(t, x, xh, FeatureExtractor::none()), t) == 0.5);
}

TEST_CASE("reconstruction loss matches the scalar feature oracle") {
  Tensor x = random_frame(Shape{3, 16, 16}, 11);
  Tensor xh = random_frame(Shape{3, 16, 16}, 12);
  FeatureExtractor phi = FeatureExtractor::random_features(3);

  // Recover the weights through the export path so the oracle shares nothing
  // with the library's forward code.
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "vdp_phi_oracle";
  fs::remove_all(dir);
  phi.export_to(dir.string());
  auto entries = vdp::model::load_tensors(dir.string(), "phi");
  std::vector<Tensor> ws, bs;
  for (auto& [name, tensor] : entries)
    (name.back() == 'w' ? ws : bs).push_back(tensor);
  fs::remove_all(dir);
  REQUIRE(ws.size() == 3);
  REQUIRE(bs.size() == 3);

  auto fx = vdp::oracle::phi_taps_ref(x, ws, bs);
  auto fh = vdp::oracle::phi_taps_ref(xh, ws, bs);
  double want = vdp::oracle::mean_abs_diff_ref(x, xh);
  for (size_t i = 0; i < fx.size(); ++i)
    want += vdp::oracle::mean_abs_diff_ref(fx[i], fh[i]);

  Tape t;
  const double got = eval_scalar(rec_loss(t, t.constant(x), t.constant(xh), phi), t);
  CHECK(std::abs(got - want) < 1e-6);
}

TEST_CASE("feature taps have the documented shapes") {
  FeatureExtractor phi = FeatureExtractor::random_features(3);
  CHECK(phi.tap_count() == 3);
  Tape t;
  auto taps = phi.taps(t, t.constant(random_frame(Shape{3, 16, 16}, 3)));
  CHECK(t.value(taps[0]).shape() == Shape{8, 8, 8});
  CHECK(t.value(taps[1]).shape() == Shape{16, 4, 4});
  CHECK(t.value(taps[2]).shape() == Shape{32, 2, 2});

  // Odd intermediate extents skip the pool instead of failing.
  auto odd = phi.taps(t, t.constant(random_frame(Shape{3, 28, 16}, 4)));
  CHECK(t.value(odd[0]).shape() == Shape{8, 14, 8});
  CHECK(t.value(odd[1]).shape() == Shape{16, 7, 4});
  CHECK(t.value(odd[2]).shape() == Shape{32, 7, 4});
}

TEST_CASE("feature extractor is deterministic, immutable, and importable") {
  FeatureExtractor a = FeatureExtractor::random_features(3, 5);
  FeatureExtractor b = FeatureExtractor::random_features(3, 5);
  FeatureExtractor c = FeatureExtractor::random_features(3, 6);
  Tensor x = random_frame(Shape{3, 8, 8}, 8);
  Tensor ta = a.taps_value(x)[2], tb = b.taps_value(x)[2], tc = c.taps_value(x)[2];
  bool same = true, diff = false;
  for (int64_t i = 0; i < ta.numel(); ++i) {
    same = same && ta[i] == tb[i];
    diff = diff || ta[i] != tc[i];
  }
  CHECK(same);
  CHECK(diff);
  CHECK(a.provenance() == "random-seeded(5)");

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "vdp_phi_roundtrip";
  fs::remove_all(dir);
  a.export_to(dir.string());
  FeatureExtractor imp = FeatureExtractor::from_dir(dir.string(), 3);
  CHECK(imp.provenance().rfind("imported-weights", 0) == 0);
  Tensor ti = imp.taps_value(x)[2];
  for (int64_t i = 0; i < ta.numel(); ++i) CHECK(ta[i] == ti[i]);

  CHECK_THROWS_AS(FeatureExtractor::from_dir(dir.string(), 4), IoError);  // channel mismatch
  fs::remove_all(dir);
  CHECK_THROWS_AS(FeatureExtractor::from_dir(dir.string(), 3), IoError);  // gone
  CHECK_FALSE(FeatureExtractor::none().enabled());
}

TEST_CASE("pyramid loss identities and constant preservation") {
  Tensor x = random_frame(Shape{3, 24, 24}, 21);
  PyramidSpec spec;
  Tape t;
  Var vx = t.constant(x);
  CHECK(eval_scalar(pyramid_loss(t, vx, vx, spec), t) == 0.0);

  // Area averaging preserves constants, so each of the three levels
  // contributes the constant difference.
  Var zero = t.constant(Tensor::zeros(Shape{3, 24, 24}));
  Var c = t.constant(Tensor::full(Shape{3, 24, 24}, 0.25f));
  CHECK(eval_scalar(pyramid_loss(t, zero, c, spec), t) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("pyramid loss matches the per-level area oracle") {
  Tensor x = random_frame(Shape{3, 24, 24}, 22);
  Tensor xh = random_frame(Shape{3, 24, 24}, 23);
  double want = 0.0;
  for (int f : {2, 4, 8})
    want += vdp::oracle::mean_abs_diff_ref(vdp::oracle::avg_down_ref(x, f),
                                           vdp::oracle::avg_down_ref(xh, f));
  Tape t;
  const double got = eval_scalar(pyramid_loss(t, t.constant(x), t.constant(xh), PyramidSpec{}), t);
  CHECK(std::abs(got - want) < 1e-6);
}

TEST_CASE("single-scale unit pyramid equals the plain L1 term") {
  Tensor x = random_frame(Shape{3, 10, 10}, 24);
  Tensor xh = random_frame(Shape{3, 10, 10}, 25);
  PyramidSpec unit;
  unit.factors = {1};
  Tape t;
  Var vx = t.constant(x), vh = t.constant(xh);
  CHECK(eval_scalar(pyramid_loss(t, vx, vh, unit), t) ==
        eval_scalar(t.mean_abs_diff(vx, vh), t));
}

TEST_CASE("pyramid loss rejects indivisible frames with a padding hint") {
  Tape t;
  Var a = t.constant(random_frame(Shape{3, 10, 10}, 26));
  try {
    pyramid_loss(t, a, a, PyramidSpec{});
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("pad") != std::string::npos);
  }
  PyramidSpec bad;
  bad.factors = {0};
  CHECK_THROWS_AS(pyramid_loss(t, a, a, bad), ConfigError);
}

TEST_CASE("variation loss closed forms and oracle") {
  Tape t;
  CHECK(eval_scalar(variation_loss(t, t.constant(Tensor::full(Shape{3, 6, 6}, 0.7f))), t) == 0.0);

  // Vertical step edge: one unit horizontal difference per interior row.
  const int h = 5, w = 4;
  Tensor edge(Shape{1, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) edge.at(0, y, x) = x < w / 2 ? 0.0f : 1.0f;
  const double want_edge = static_cast<double>(h - 1) / (h * w);
  CHECK(eval_scalar(variation_loss(t, t.constant(edge)), t) ==
        doctest::Approx(want_edge).epsilon(1e-12));

  Tensor r = random_frame(Shape{1, 5, 5}, 31);
  CHECK(std::abs(eval_scalar(variation_loss(t, t.constant(r)), t) - vdp::oracle::tv_ref(r)) <
        1e-7);
}

TEST_CASE("final loss identities, masking, and permutation invariance") {
  FeatureExtractor phi = FeatureExtractor::random_features(3);
  PyramidSpec spec;
  std::vector<Tensor> video;
  for (uint64_t i = 0; i < 3; ++i) video.push_back(random_frame(Shape{3, 16, 16}, 40 + i));

  {  // perfect reconstruction with no variation weight -> exactly zero
    Tape t;
    std::vector<Var> xs, hs;
    for (const Tensor& f : video) {
      xs.push_back(t.constant(f));
      hs.push_back(t.constant(f));
    }
    CHECK(eval_scalar(final_loss(t, xs, hs, LossWeights{1.0, 1e-4, 0.0}, phi, spec), t) == 0.0);
  }
  {  // (1, 0, 0) equals the summed reconstruction terms
    Tape t;
    std::vector<Var> xs, hs, recs;
    for (uint64_t i = 0; i < 3; ++i) {
      xs.push_back(t.constant(video[i]));
      hs.push_back(t.constant(random_frame(Shape{3, 16, 16}, 50 + i)));
      recs.push_back(rec_loss(t, xs.back(), hs.back(), phi));
    }
    const double got = eval_scalar(final_loss(t, xs, hs, LossWeights{1.0, 0.0, 0.0}, phi, spec), t);
    CHECK(got == eval_scalar(t.add_n(recs), t));
  }
  {  // reordering the (X_t, X̂_t) pairs leaves the value unchanged
    Tape t;
    std::vector<Var> xs, hs;
    for (uint64_t i = 0; i < 3; ++i) {
      xs.push_back(t.constant(video[i]));
      hs.push_back(t.constant(random_frame(Shape{3, 16, 16}, 60 + i)));
    }
    const LossWeights w = LossWeights::denoise();
    const double fwd = eval_scalar(final_loss(t, xs, hs, w, phi, spec), t);
    std::vector<Var> xs_r{xs[2], xs[0], xs[1]}, hs_r{hs[2], hs[0], hs[1]};
    const double perm = eval_scalar(final_loss(t, xs_r, hs_r, w, phi, spec), t);
    CHECK(fwd == doctest::Approx(perm).epsilon(1e-12));
  }
  {  // length mismatch is rejected
    Tape t;
    std::vector<Var> xs{t.constant(video[0])};
    std::vector<Var> hs{t.constant(video[0]), t.constant(video[1])};
    CHECK_THROWS_AS(final_loss(t, xs, hs, LossWeights::denoise(), phi, spec), ShapeError);
  }
}

TEST_CASE("precomputed targets reproduce the plain objective exactly") {
  FeatureExtractor phi = FeatureExtractor::random_features(3);
  PyramidSpec spec;
  const LossWeights w = LossWeights::denoise();
  std::vector<Tensor> video;
  for (uint64_t i = 0; i < 3; ++i) video.push_back(random_frame(Shape{3, 16, 16}, 70 + i));
  std::vector<FrameTarget> targets;
  for (const Tensor& f : video) targets.push_back(make_target(f, phi));

  Tape t;
  std::vector<Var> xs, hs;
  for (uint64_t i = 0; i < 3; ++i) {
    xs.push_back(t.constant(video[i]));
    hs.push_back(t.constant(random_frame(Shape{3, 16, 16}, 80 + i)));
  }
  const double plain = eval_scalar(final_loss(t, xs, hs, w, phi, spec), t);
  const double cached = eval_scalar(final_loss_to_targets(t, targets, hs, w, phi, spec), t);
  CHECK(plain == cached);
}

TEST_CASE("super-resolution loss composes downsampling with the base terms") {
  FeatureExtractor phi = FeatureExtractor::random_features(3);
  PyramidSpec spec;
  spec.factors = {2, 4};  // low-res frames are 8x8 here
  Tensor lr = random_frame(Shape{3, 8, 8}, 90);

  {  // prediction whose downscale is exactly the input, no variation weight
    Tape t;
    Var vlr = t.constant(lr);
    Var hr = t.upsample_nearest(vlr, 4);  // area mean of a constant block restores it
    CHECK(eval_scalar(sr_loss(t, vlr, hr, 4, LossWeights{1.0, 0.01, 0.0}, phi, spec), t) == 0.0);
  }
  {  // random case equals the manual composition
    Tape t;
    Var vlr = t.constant(lr);
    Var hr = t.constant(random_frame(Shape{3, 32, 32}, 91));
    const LossWeights w = LossWeights::superres();
    const double got = eval_scalar(sr_loss(t, vlr, hr, 4, w, phi, spec), t);
    Var down = t.avg_downsample(hr, 4);
    std::vector<Var> terms{t.scale(rec_loss(t, vlr, down, phi), w.rec),
                           t.scale(pyramid_loss(t, vlr, down, spec), w.spl),
                           t.scale(variation_loss(t, hr), w.var)};
    CHECK(got == eval_scalar(t.add_n(terms), t));
  }
  {  // scale mismatch is rejected
    Tape t;
    Var vlr = t.constant(lr);
    Var hr = t.constant(random_frame(Shape{3, 32, 32}, 92));
    CHECK_THROWS_AS(sr_loss(t, vlr, hr, 2, LossWeights::superres(), phi, spec), ShapeError);
  }
}

TEST_CASE("removal loss masks the data terms and ignores hole content") {
  FeatureExtractor phi = FeatureExtractor::random_features(3);
  PyramidSpec spec;
  spec.factors = {2, 4};
  const Shape fs{3, 8, 8};
  Tensor x = random_frame(fs, 100), xh = random_frame(fs, 101);

  Tensor ones = Tensor::full(Shape{8, 8}, 1.0f);
  Tensor hole = Tensor::full(Shape{1, 8, 8}, 1.0f);  // zero out a 3x3 region
  for (int y = 2; y < 5; ++y)
    for (int xx = 2; xx < 5; ++xx) hole.at(0, y, xx) = 0.0f;

  {  // all-ones mask equals the unmasked summand
    Tape t;
    Var vx = t.constant(x), vh = t.constant(xh);
    const LossWeights w = LossWeights::removal();
    const double got = eval_scalar(removal_loss(t, vx, ones, vh, w, phi, spec), t);
    std::vector<Var> terms{t.scale(rec_loss(t, vx, vh, phi), w.rec),
                           t.scale(pyramid_loss(t, vx, vh, spec), w.spl),
                           t.scale(variation_loss(t, vh), w.var)};
    CHECK(got == doctest::Approx(eval_scalar(t.add_n(terms), t)).epsilon(1e-12));
  }
  {  // all-zeros mask with no variation weight is zero no matter the frames
    Tape t;
    CHECK(eval_scalar(removal_loss(t, t.constant(x), Tensor::zeros(Shape{8, 8}),
                                   t.constant(xh), LossWeights{1.0, 0.01, 0.0}, phi, spec),
                      t) == 0.0);
  }
  {  // changing X inside the hole leaves the loss bit-identical
    Tape t;
    const LossWeights w = LossWeights::removal();
    const double before =
        eval_scalar(removal_loss(t, t.constant(x), hole, t.constant(xh), w, phi, spec), t);
    Tensor x2 = x;
    Rng rng(102);
    for (int ci = 0; ci < 3; ++ci)
      for (int y = 2; y < 5; ++y)
        for (int xx = 2; xx < 5; ++xx)
          x2.at(ci, y, xx) = static_cast<float>(rng.uniform01());
    const double after =
        eval_scalar(removal_loss(t, t.constant(x2), hole, t.constant(xh), w, phi, spec), t);
    CHECK(before == after);
  }
  {  // non-binary masks are rejected
    Tape t;
    Tensor gray = Tensor::full(Shape{8, 8}, 0.5f);
    CHECK_THROWS_AS(removal_loss(t, t.constant(x), gray, t.constant(xh),
                                 LossWeights::removal(), phi, spec),
                    ConfigError);
  }
}

TEST_CASE("downsampler identities across kernels") {
  Tensor x = random_frame(Shape{3, 12, 12}, 110);

  Tensor id_area = downsample(x, 1, DownKernel::area);
  Tensor id_cubic = downsample(x, 1, DownKernel::cubic);
  for (int64_t i = 0; i < x.numel(); ++i) {
    CHECK(id_area[i] == x[i]);
    CHECK(id_cubic[i] == x[i]);
  }

  Tensor block(Shape{1, 2, 2}, std::vector<float>{0.0f, 0.0f, 1.0f, 1.0f});
  CHECK(downsample(block, 2)[0] == 0.5f);

  // d2 ∘ d2 = d4 exactly for area averaging.
  Tensor d2 = downsample(downsample(x, 2), 2);
  Tensor d4 = downsample(x, 4);
  for (int64_t i = 0; i < d4.numel(); ++i) CHECK(d2[i] == doctest::Approx(d4[i]).epsilon(1e-7));

  // Constant preservation holds for the cubic kernel (weights normalized).
  Tensor c = Tensor::full(Shape{2, 8, 8}, 0.37f);
  Tensor cd = downsample(c, 2, DownKernel::cubic);
  for (int64_t i = 0; i < cd.numel(); ++i) CHECK(cd[i] == doctest::Approx(0.37f).epsilon(1e-6));

  // And the cubic path matches the independent double-loop reference.
  Tensor got = downsample(x, 2, DownKernel::cubic);
  Tensor want = vdp::oracle::cubic_down_ref(x, 2);
  REQUIRE(got.shape() == want.shape());
  for (int64_t i = 0; i < got.numel(); ++i)
    CHECK(std::abs(got[i] - want[i]) < 1e-6);

  Tensor got3 = downsample(random_frame(Shape{1, 9, 9}, 111), 3, DownKernel::cubic);
  Tensor want3 = vdp::oracle::cubic_down_ref(random_frame(Shape{1, 9, 9}, 111), 3);
  for (int64_t i = 0; i < got3.numel(); ++i)
    CHECK(std::abs(got3[i] - want3[i]) < 1e-6);
}

TEST_CASE("every loss gradient passes the finite-difference check") {
  using vdp::diff::GradCheckOptions;
  const Shape fs{3, 8, 8};
  Tensor x = random_frame(fs, 120);
  FeatureExtractor phi = FeatureExtractor::random_features(3);
  PyramidSpec spec;
  spec.factors = {2, 4};
  GradCheckOptions opts;
  opts.probe_count = 10;

  auto run = [&](const char* what, ParamLeaf& leaf, auto&& build) {
    ParamSet ps;
    ps.add(leaf);
    auto res = vdp::diff::grad_check_fn(build, ps, opts);
    INFO(what, ": max rel err ", res.max_rel_err, " at ", res.worst_leaf, "[",
         res.worst_index, "]");
    CHECK(res.max_rel_err < 1e-4);
  };

  {
    ParamLeaf leaf("xhat", random_frame(fs, 121));
    run("rec", leaf, [&](bool with_grad) {
      Tape t;
      Var v = rec_loss(t, t.constant(x), t.param(leaf), phi);
      if (with_grad) t.backward(v);
      return t.scalar_f64(v);
    });
  }
  {
    ParamLeaf leaf("xhat", random_frame(fs, 122));
    run("pyramid", leaf, [&](bool with_grad) {
      Tape t;
      Var v = pyramid_loss(t, t.constant(x), t.param(leaf), spec);
      if (with_grad) t.backward(v);
      return t.scalar_f64(v);
    });
  }
  {
    PyramidSpec cubic_spec;
    cubic_spec.factors = {2, 4};
    cubic_spec.kernel = DownKernel::cubic;
    ParamLeaf leaf("xhat", random_frame(fs, 123));
    run("pyramid-cubic", leaf, [&](bool with_grad) {
      Tape t;
      Var v = pyramid_loss(t, t.constant(x), t.param(leaf), cubic_spec);
      if (with_grad) t.backward(v);
      return t.scalar_f64(v);
    });
  }
  {
    ParamLeaf leaf("xhat", random_frame(fs, 124));
    run("variation", leaf, [&](bool with_grad) {
      Tape t;
      Var v = variation_loss(t, t.param(leaf));
      if (with_grad) t.backward(v);
      return t.scalar_f64(v);
    });
  }
  {
    ParamLeaf leaf("xhat_hr", random_frame(Shape{3, 16, 16}, 125));
    Tensor lr = random_frame(Shape{3, 8, 8}, 126);
    run("sr", leaf, [&](bool with_grad) {
      Tape t;
      Var v = sr_loss(t, t.constant(lr), t.param(leaf), 2, LossWeights::superres(), phi, spec);
      if (with_grad) t.backward(v);
      return t.scalar_f64(v);
    });
  }
  {
    ParamLeaf leaf("xhat", random_frame(fs, 127));
    Tensor hole(Shape{8, 8});
    for (int64_t i = 0; i < hole.numel(); ++i) hole[i] = i % 3 == 0 ? 0.0f : 1.0f;
    run("removal", leaf, [&](bool with_grad) {
      Tape t;
      Var v = removal_loss(t, t.constant(x), hole, t.param(leaf), LossWeights::removal(), phi,
                           spec);
      if (with_grad) t.backward(v);
      return t.scalar_f64(v);
    });
  }
}

TEST_SUITE_END();
