// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vdp/errors.hpp"
#include "vdp/model.hpp"

using vdp::ConfigError;
using vdp::IoError;
using vdp::Rng;
using vdp::Shape;
using vdp::ShapeError;
using vdp::Tensor;
using vdp::diff::ParamLeaf;
using vdp::diff::Tape;
using vdp::diff::Var;
using vdp::model::LstmState;
using vdp::model::ModelConfig;
using vdp::model::VdpModel;

namespace {

ModelConfig tiny_config(uint64_t seed = 3) {
  ModelConfig cfg;
  cfg.d = 8;
  cfg.hidden = 8;
  cfg.lstm_layers = 2;
  cfg.out_c = 3;
  cfg.out_h = 8;
  cfg.out_w = 8;
  cfg.c0 = 8;
  cfg.min_conv_channels = 4;
  cfg.seed = seed;
  return cfg;
}

void zero_leaves_with_prefix(VdpModel& m, const std::string& prefix) {
  for (ParamLeaf& l : m.leaves().all())
    if (l.name.rfind(prefix, 0) == 0)
      for (int64_t i = 0; i < l.value.numel(); ++i) l.value[i] = 0.0f;
}

bool tensors_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (int64_t i = 0; i < a.numel(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

}  // namespace

TEST_SUITE_BEGIN("model");

TEST_CASE("config defaults and depth derivation") {
  ModelConfig cfg;
  CHECK(cfg.d == 1024);
  CHECK(cfg.hidden == 1024);
  CHECK(cfg.lstm_layers == 4);
  CHECK(cfg.out_c == 3);

  cfg.out_h = 64;
  cfg.out_w = 64;
  CHECK(cfg.resolved_depth() == 4);  // 64 -> base 4
  CHECK(cfg.base_h() == 4);

  cfg.out_h = 32;
  cfg.out_w = 32;
  CHECK(cfg.resolved_depth() == 3);  // 32 -> base 4

  cfg.out_h = 48;
  cfg.out_w = 48;
  CHECK(cfg.resolved_depth() == 3);  // 48 -> base 6 (48/16 = 3 would be too small)
  CHECK(cfg.base_h() == 6);

  cfg.out_h = 112;
  cfg.out_w = 64;
  CHECK(cfg.resolved_depth() == 4);  // base 7x4
  CHECK(cfg.base_h() == 7);
  CHECK(cfg.base_w() == 4);

  cfg.out_h = 64;
  cfg.out_w = 64;
  cfg.depth = 2;
  CHECK(cfg.resolved_depth() == 2);
  CHECK(cfg.base_h() == 16);
  CHECK_NOTHROW(cfg.validate());

  cfg.out_h = 30;  // not divisible by 2^2
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = ModelConfig{};
  cfg.d = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("initial latent is deterministic with standard-normal moments") {
  Tensor a = vdp::model::sample_initial_latent(42, 100000);
  Tensor b = vdp::model::sample_initial_latent(42, 100000);
  CHECK(tensors_equal(a, b));
  Tensor c = vdp::model::sample_initial_latent(43, 100000);
  CHECK_FALSE(tensors_equal(a, c));

  double sum = 0.0, sq = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    sum += a[i];
    sq += static_cast<double>(a[i]) * a[i];
  }
  const double mean = sum / static_cast<double>(a.numel());
  const double stddev = std::sqrt(sq / static_cast<double>(a.numel()) - mean * mean);
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(stddev - 1.0) < 0.02);
}

TEST_CASE("zeroed recurrence maps any latent to exactly zero") {
  VdpModel m(tiny_config());
  zero_leaves_with_prefix(m, "lfp.");
  Tape t;
  Rng rng(11);
  Tensor z(Shape{8});
  for (int i = 0; i < 8; ++i) z[i] = static_cast<float>(rng.normal());
  LstmState st = m.initial_state(t);
  Var z1 = m.lfpnet_step(t, t.constant(z), st);
  for (float v : t.value(z1).vec()) CHECK(v == 0.0f);
}

TEST_CASE("latent advance stays inside the tanh range") {
  VdpModel m(tiny_config(5));
  Tape t;
  Rng rng(12);
  Tensor z(Shape{8});
  for (int i = 0; i < 8; ++i) z[i] = static_cast<float>(3.0 * rng.normal());
  LstmState st = m.initial_state(t);
  Var z1 = m.lfpnet_step(t, t.constant(z), st);
  double max_abs = 0.0;
  for (float v : t.value(z1).vec()) {
    CHECK(std::abs(v) < 1.0f);
    max_abs = std::max(max_abs, static_cast<double>(std::abs(v)));
  }
  CHECK(max_abs > 0.0);  // non-degenerate
}

TEST_CASE("rollout composes single latent steps and a joint decode") {
  VdpModel m(tiny_config(7));
  Tape t;
  auto r = m.rollout(t, 3);
  REQUIRE(r.latents.size() == 3);
  REQUIRE(r.frames.size() == 3);
  CHECK(r.decode_from == 0);
  CHECK_FALSE(r.t1_fallback);
  CHECK(r.bn_stats.size() == 1);  // one up-block at 8x8

  // Manual composition on the same tape must match bitwise.
  Var z0 = t.constant(m.z0());
  LstmState st = m.initial_state(t);
  Var z1 = m.lfpnet_step(t, z0, st);
  Var z2 = m.lfpnet_step(t, z1, st);
  CHECK(tensors_equal(t.value(r.latents[0]), m.z0()));
  CHECK(tensors_equal(t.value(r.latents[1]), t.value(z1)));
  CHECK(tensors_equal(t.value(r.latents[2]), t.value(z2)));

  auto frames = m.decode_batch(t, {z0, z1, z2});
  for (int i = 0; i < 3; ++i)
    CHECK(tensors_equal(t.value(r.frames[static_cast<size_t>(i)]),
                        t.value(frames[static_cast<size_t>(i)])));

  // include_frame0 = false shifts the decode window.
  Tape t2;
  auto r2 = m.rollout(t2, 3, false);
  CHECK(r2.decode_from == 1);
  CHECK(r2.latents.size() == 3);
  CHECK(r2.frames.size() == 2);
}

TEST_CASE("single-frame decode falls back to instance statistics") {
  VdpModel m(tiny_config());
  Tape t;
  auto r = m.rollout(t, 1);
  CHECK(r.frames.size() == 1);
  CHECK(r.t1_fallback);

  bool flag = false;
  auto frames = m.decode_batch(t, {t.constant(m.z0())}, nullptr, &flag);
  CHECK(flag);
  CHECK(frames.size() == 1);
}

TEST_CASE("decoded frames lie strictly inside the unit interval") {
  VdpModel m(tiny_config(9));
  Tape t;
  auto r = m.rollout(t, 2);
  for (Var f : r.frames) {
    CHECK(t.value(f).shape() == Shape{3, 8, 8});
    for (float v : t.value(f).vec()) {
      CHECK(v > 0.0f);
      CHECK(v < 1.0f);
    }
  }
}

TEST_CASE("zero final convolution yields exact mid-gray") {
  VdpModel m(tiny_config());
  zero_leaves_with_prefix(m, "fd.final.");
  Tape t;
  auto r = m.rollout(t, 2);
  for (Var f : r.frames)
    for (float v : t.value(f).vec()) CHECK(v == 0.5f);  // sigmoid(0)
}

TEST_CASE("decode shape follows the configuration") {
  ModelConfig cfg = tiny_config();
  cfg.out_c = 3;
  cfg.out_h = 32;
  cfg.out_w = 16;
  cfg.c0 = 8;
  VdpModel m(cfg);
  CHECK(cfg.resolved_depth() == 2);  // base 8x4
  Tape t;
  auto frames = m.decode_batch(t, {t.constant(m.z0())});
  CHECK(t.value(frames[0]).shape() == Shape{3, 32, 16});
}

TEST_CASE("construction and rollouts are deterministic") {
  VdpModel a(tiny_config(21)), b(tiny_config(21));
  auto &la = a.leaves().all(), &lb = b.leaves().all();
  REQUIRE(la.size() == lb.size());
  for (size_t i = 0; i < la.size(); ++i) {
    CHECK(la[i].name == lb[i].name);
    CHECK(tensors_equal(la[i].value, lb[i].value));
  }
  CHECK(tensors_equal(a.z0(), b.z0()));

  Tape ta, tb;
  auto ra = a.rollout(ta, 3), rb = b.rollout(tb, 3);
  for (size_t i = 0; i < ra.frames.size(); ++i)
    CHECK(tensors_equal(ta.value(ra.frames[i]), tb.value(rb.frames[i])));

  VdpModel c(tiny_config(22));
  bool any_diff = false;
  auto& lc = c.leaves().all();
  for (size_t i = 0; i < la.size() && !any_diff; ++i)
    any_diff = !tensors_equal(la[i].value, lc[i].value);
  CHECK(any_diff);
}

TEST_CASE("repeated rollouts start from a fresh recurrent state") {
  VdpModel m(tiny_config(31));
  Tape t1;
  auto r1 = m.rollout(t1, 4);
  Tape t2;
  auto r2 = m.rollout(t2, 4);
  for (size_t i = 0; i < r1.frames.size(); ++i)
    CHECK(tensors_equal(t1.value(r1.frames[i]), t2.value(r2.frames[i])));
}

TEST_CASE("every parameter receives gradient through a training objective") {
  ModelConfig cfg = tiny_config(17);
  cfg.train_z0 = true;
  VdpModel m(cfg);
  Tape t;
  auto r = m.rollout(t, 3);
  Rng rng(55);
  std::vector<Var> terms;
  for (Var f : r.frames) {
    Tensor tgt(Shape{3, 8, 8});
    for (int64_t i = 0; i < tgt.numel(); ++i) tgt[i] = static_cast<float>(rng.uniform01());
    terms.push_back(t.mean_abs_diff(f, t.constant(tgt)));
  }
  Var loss = t.add_n(terms);
  m.param_set().zero_grad();
  t.backward(loss);
  for (const ParamLeaf& l : m.leaves().all()) {
    double max_abs = 0.0;
    for (int64_t i = 0; i < l.grad.numel(); ++i)
      max_abs = std::max(max_abs, static_cast<double>(std::abs(l.grad[i])));
    INFO("leaf ", l.name);
    CHECK(max_abs > 0.0);
  }
}

TEST_CASE("frozen-statistics decode matches the batch path at its operating point") {
  VdpModel m(tiny_config(41));
  Tape t;
  auto r = m.rollout(t, 3);
  for (size_t i = 0; i < r.frames.size(); ++i) {
    Var f = m.decode_frozen(t, r.latents[i], r.bn_stats);
    const Tensor &got = t.value(f), &want = t.value(r.frames[i]);
    REQUIRE(got.shape() == want.shape());
    for (int64_t k = 0; k < got.numel(); ++k)
      CHECK(std::abs(got[k] - want[k]) < 1e-5);
  }
}

TEST_CASE("tensor archive round-trips entries in order") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "vdp_archive_test";
  fs::remove_all(dir);

  Rng rng(91);
  std::vector<std::pair<std::string, Tensor>> entries;
  Tensor a(Shape{2, 3});
  Tensor b(Shape{4});
  Tensor c(Shape{2, 2, 3, 3});
  for (auto* ten : {&a, &b, &c})
    for (int64_t i = 0; i < ten->numel(); ++i) (*ten)[i] = static_cast<float>(rng.normal());
  entries.emplace_back("alpha", a);
  entries.emplace_back("beta.x", b);
  entries.emplace_back("gamma", c);
  vdp::model::save_tensors(dir.string(), entries, "arch");

  auto back = vdp::model::load_tensors(dir.string(), "arch");
  REQUIRE(back.size() == 3);
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].first == entries[i].first);
    CHECK(tensors_equal(back[i].second, entries[i].second));
  }

  CHECK_THROWS_AS(
      vdp::model::save_tensors(dir.string(), {{"bad name", Tensor(Shape{1})}}, "bad"),
      IoError);
  CHECK_THROWS_AS(vdp::model::load_tensors(dir.string(), "missing"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("checkpoint round-trip restores parameters, latent, and statistics") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "vdp_ckpt_test";
  fs::remove_all(dir);

  VdpModel a(tiny_config(7));
  {
    Tape t;
    auto r = a.rollout(t, 3);
    a.set_frozen_stats(r.bn_stats);
  }
  a.save_checkpoint(dir.string());

  VdpModel b(tiny_config(9));  // different init on purpose
  b.load_checkpoint(dir.string());
  auto &la = a.leaves().all(), &lb = b.leaves().all();
  REQUIRE(la.size() == lb.size());
  for (size_t i = 0; i < la.size(); ++i) CHECK(tensors_equal(la[i].value, lb[i].value));
  CHECK(tensors_equal(a.z0(), b.z0()));
  REQUIRE(b.frozen_stats().size() == a.frozen_stats().size());
  for (size_t i = 0; i < a.frozen_stats().size(); ++i) {
    CHECK(tensors_equal(a.frozen_stats()[i].mean, b.frozen_stats()[i].mean));
    CHECK(tensors_equal(a.frozen_stats()[i].var, b.frozen_stats()[i].var));
  }

  // Same latent + same frozen statistics -> bitwise identical decodes.
  Tape ta, tb;
  Var fa = a.decode_frozen(ta, ta.constant(a.z0()), a.frozen_stats());
  Var fb = b.decode_frozen(tb, tb.constant(b.z0()), b.frozen_stats());
  CHECK(tensors_equal(ta.value(fa), tb.value(fb)));

  // Mismatched architectures are rejected.
  ModelConfig small = tiny_config();
  small.hidden = 4;
  VdpModel c(small);
  CHECK_THROWS_AS(c.load_checkpoint(dir.string()), ShapeError);

  ModelConfig deeper = tiny_config();
  deeper.out_h = 16;
  deeper.out_w = 16;  // two blocks -> parameters absent from the checkpoint
  VdpModel d(deeper);
  CHECK_THROWS_AS(d.load_checkpoint(dir.string()), IoError);

  CHECK_THROWS_AS(a.load_checkpoint((dir / "nope").string()), IoError);
  fs::remove_all(dir);
}

TEST_CASE("graph size estimate grows with frames and resolution") {
  VdpModel m(tiny_config());
  CHECK(m.estimate_epoch_bytes(4) > m.estimate_epoch_bytes(2));
  ModelConfig big = tiny_config();
  big.out_h = 32;
  big.out_w = 32;
  VdpModel mb(big);
  CHECK(mb.estimate_epoch_bytes(2) > m.estimate_epoch_bytes(2));
  CHECK(m.param_count() > 0);
}

TEST_SUITE_END();
