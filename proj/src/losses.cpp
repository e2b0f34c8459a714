// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0

#include "vdp/losses.hpp"

#include <cmath>
#include <utility>

#include "vdp/errors.hpp"
#include "vdp/model.hpp"
#include "vdp/rng.hpp"

namespace vdp::losses {

namespace {

constexpr uint64_t kPhiStream = 0xfea7;

void fill_uniform(Tensor& t, Rng& rng, double bound) {
  for (int64_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<float>(rng.uniform(-bound, bound));
}

Var sum_terms(Tape& t, std::vector<Var>& terms) {
  if (terms.empty()) return t.constant(Tensor::scalar(0.0f));
  if (terms.size() == 1) return terms[0];
  return t.add_n(terms);
}

// Expands an [H,W] / [1,H,W] mask to [C,H,W] and validates binary values.
Tensor broadcast_mask(const Tensor& mask, const Shape& frame) {
  const int c = frame[0], h = frame[1], w = frame[2];
  const Shape& ms = mask.shape();
  const bool plane = ms == Shape{h, w} || ms == Shape{1, h, w};
  if (!plane && ms != frame)
    throw ShapeError("removal_loss: mask shape " + ms.str() + " does not cover frame " +
                     frame.str());
  for (int64_t i = 0; i < mask.numel(); ++i)
    if (mask[i] != 0.0f && mask[i] != 1.0f)
      throw ConfigError("removal_loss: mask must be binary {0,1}, found " +
                        std::to_string(mask[i]));
  if (!plane) return mask;
  Tensor out(frame);
  const int64_t pix = static_cast<int64_t>(h) * w;
  for (int ci = 0; ci < c; ++ci)
    for (int64_t i = 0; i < pix; ++i) out[ci * pix + i] = mask[i];
  return out;
}

}  // namespace

void LossWeights::validate() const {
  if (rec < 0.0 || spl < 0.0 || var < 0.0)
    throw ConfigError("loss weights must be nonnegative");
  if (rec == 0.0 && spl == 0.0 && var == 0.0)
    throw ConfigError("at least one loss weight must be positive");
}

void PyramidSpec::validate(int h, int w) const {
  if (factors.empty()) throw ConfigError("pyramid: scale factor list is empty");
  for (int f : factors) {
    if (f < 1) throw ConfigError("pyramid: scale factors must be >= 1");
    if (h % f != 0 || w % f != 0)
      throw ShapeError("pyramid: frame " + std::to_string(h) + "x" + std::to_string(w) +
                       " not divisible by scale factor " + std::to_string(f) +
                       "; pad the frame to a multiple first");
  }
}

FeatureExtractor FeatureExtractor::random_features(int in_channels, uint64_t seed) {
  if (in_channels < 1) throw ConfigError("feature extractor: in_channels must be >= 1");
  FeatureExtractor fe;
  fe.in_channels_ = in_channels;
  fe.provenance_ = "random-seeded(" + std::to_string(seed) + ")";
  Rng rng(Rng::mix(seed, kPhiStream));
  int ci = in_channels;
  for (int co : {8, 16, 32}) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(ci) * 9.0);
    Tensor w(Shape{co, ci, 3, 3}), b(Shape{co});
    fill_uniform(w, rng, bound);
    fill_uniform(b, rng, bound);
    fe.conv_w_.push_back(std::move(w));
    fe.conv_b_.push_back(std::move(b));
    ci = co;
  }
  return fe;
}

FeatureExtractor FeatureExtractor::from_dir(const std::string& dir, int in_channels) {
  auto entries = model::load_tensors(dir, "phi");
  FeatureExtractor fe;
  fe.in_channels_ = in_channels;
  fe.provenance_ = "imported-weights(" + dir + ")";
  int ci = in_channels;
  for (size_t i = 0;; ++i) {
    const std::string wname = "phi.b" + std::to_string(i) + ".w";
    const std::string bname = "phi.b" + std::to_string(i) + ".b";
    const Tensor *w = nullptr, *b = nullptr;
    for (const auto& [name, tensor] : entries) {
      if (name == wname) w = &tensor;
      if (name == bname) b = &tensor;
    }
    if (!w && !b) break;
    if (!w || !b)
      throw IoError("feature import: block " + std::to_string(i) + " is missing its " +
                    std::string(w ? "bias" : "weight"));
    const Shape& ws = w->shape();
    if (ws.ndim() != 4 || ws[2] != ws[3] || ws[2] % 2 == 0)
      throw IoError("feature import: " + wname + " must be [Co,Ci,k,k] with odd k, got " +
                    ws.str());
    if (ws[1] != ci)
      throw IoError("feature import: " + wname + " expects " + std::to_string(ws[1]) +
                    " input channels, chain provides " + std::to_string(ci));
    if (b->shape() != Shape{ws[0]})
      throw IoError("feature import: " + bname + " shape " + b->shape().str() +
                    " does not match " + std::to_string(ws[0]) + " output channels");
    fe.conv_w_.push_back(*w);
    fe.conv_b_.push_back(*b);
    ci = ws[0];
  }
  if (fe.conv_w_.empty()) throw IoError("feature import: no blocks found in " + dir);
  return fe;
}

FeatureExtractor FeatureExtractor::none() { return FeatureExtractor{}; }

void FeatureExtractor::export_to(const std::string& dir) const {
  if (!enabled()) throw ConfigError("feature extractor: cannot export a disabled extractor");
  std::vector<std::pair<std::string, Tensor>> entries;
  for (size_t i = 0; i < conv_w_.size(); ++i) {
    entries.emplace_back("phi.b" + std::to_string(i) + ".w", conv_w_[i]);
    entries.emplace_back("phi.b" + std::to_string(i) + ".b", conv_b_[i]);
  }
  model::save_tensors(dir, entries, "phi");
}

std::vector<Var> FeatureExtractor::taps(Tape& t, Var x) const {
  const Shape& s = t.value(x).shape();
  if (s.ndim() != 3)
    throw ShapeError("feature extractor: input must be [C,H,W], got " + s.str());
  if (s[0] != in_channels_)
    throw ShapeError("feature extractor: built for " + std::to_string(in_channels_) +
                     " channels, got frame with " + std::to_string(s[0]));
  std::vector<Var> out;
  Var cur = x;
  for (size_t i = 0; i < conv_w_.size(); ++i) {
    const int k = conv_w_[i].shape()[2];
    Var y = t.conv2d(cur, t.constant(conv_w_[i]), t.constant(conv_b_[i]), 1, k / 2);
    y = t.leaky_relu(y);
    const Shape& ys = t.value(y).shape();
    if (ys[1] % 2 == 0 && ys[2] % 2 == 0 && ys[1] >= 2 && ys[2] >= 2)
      y = t.avg_downsample(y, 2);
    out.push_back(y);
    cur = y;
  }
  return out;
}

std::vector<Tensor> FeatureExtractor::taps_value(const Tensor& x) const {
  Tape t;
  std::vector<Tensor> out;
  for (Var v : taps(t, t.constant(x))) out.push_back(t.value(v));
  return out;
}

Var downsample(Tape& t, Var x, int factor, DownKernel kernel) {
  return kernel == DownKernel::area ? t.avg_downsample(x, factor) : t.cubic_downsample(x, factor);
}

Tensor downsample(const Tensor& x, int factor, DownKernel kernel) {
  Tape t;
  return t.value(downsample(t, t.constant(x), factor, kernel));
}

Var rec_loss(Tape& t, Var x, Var xhat, const FeatureExtractor& phi) {
  check_same_shape(t.value(x), t.value(xhat), "rec_loss frames");
  std::vector<Var> terms{t.mean_abs_diff(x, xhat)};
  if (phi.enabled()) {
    std::vector<Var> fx = phi.taps(t, x), fh = phi.taps(t, xhat);
    for (size_t i = 0; i < fx.size(); ++i) terms.push_back(t.mean_abs_diff(fx[i], fh[i]));
  }
  return sum_terms(t, terms);
}

Var pyramid_loss(Tape& t, Var x, Var xhat, const PyramidSpec& spec) {
  const Shape& s = t.value(x).shape();
  check_same_shape(t.value(x), t.value(xhat), "pyramid_loss frames");
  if (s.ndim() != 3) throw ShapeError("pyramid_loss: frames must be [C,H,W], got " + s.str());
  spec.validate(s[1], s[2]);
  std::vector<Var> terms;
  for (int f : spec.factors)
    terms.push_back(
        t.mean_abs_diff(downsample(t, x, f, spec.kernel), downsample(t, xhat, f, spec.kernel)));
  return sum_terms(t, terms);
}

Var variation_loss(Tape& t, Var xhat) { return t.tv_l1(xhat); }

Var rec_loss_to_target(Tape& t, const FrameTarget& target, Var xhat,
                       const FeatureExtractor& phi) {
  Var x = t.constant(target.x);
  check_same_shape(target.x, t.value(xhat), "rec_loss frames");
  std::vector<Var> terms{t.mean_abs_diff(x, xhat)};
  if (phi.enabled()) {
    if (target.taps.size() != static_cast<size_t>(phi.tap_count()))
      throw ShapeError("rec_loss_to_target: target carries " +
                       std::to_string(target.taps.size()) + " taps, extractor has " +
                       std::to_string(phi.tap_count()));
    std::vector<Var> fh = phi.taps(t, xhat);
    for (size_t k = 0; k < fh.size(); ++k)
      terms.push_back(t.mean_abs_diff(t.constant(target.taps[k]), fh[k]));
  }
  return sum_terms(t, terms);
}

namespace {

// Shared core: rec taps for target frames may be precomputed constants.
Var final_loss_impl(Tape& t, const std::vector<Var>& video,
                    const std::vector<const FrameTarget*>& targets,
                    const std::vector<Var>& rollout, const LossWeights& w,
                    const FeatureExtractor& phi, const PyramidSpec& spec) {
  w.validate();
  if (video.size() != rollout.size())
    throw ShapeError("final_loss: video has " + std::to_string(video.size()) +
                     " frames but rollout has " + std::to_string(rollout.size()));
  if (video.empty()) throw ShapeError("final_loss: empty sequence");
  std::vector<Var> terms;
  for (size_t i = 0; i < video.size(); ++i) {
    Var x = video[i], xh = rollout[i];
    if (w.rec > 0.0) {
      Var r = targets[i] ? rec_loss_to_target(t, *targets[i], xh, phi)
                         : rec_loss(t, x, xh, phi);
      terms.push_back(t.scale(r, w.rec));
    }
    if (w.spl > 0.0) terms.push_back(t.scale(pyramid_loss(t, x, xh, spec), w.spl));
    if (w.var > 0.0) terms.push_back(t.scale(variation_loss(t, xh), w.var));
  }
  return sum_terms(t, terms);
}

}  // namespace

Var final_loss(Tape& t, const std::vector<Var>& video, const std::vector<Var>& rollout,
               const LossWeights& w, const FeatureExtractor& phi, const PyramidSpec& spec) {
  std::vector<const FrameTarget*> no_targets(video.size(), nullptr);
  return final_loss_impl(t, video, no_targets, rollout, w, phi, spec);
}

FrameTarget make_target(const Tensor& x, const FeatureExtractor& phi) {
  FrameTarget ft;
  ft.x = x;
  if (phi.enabled()) ft.taps = phi.taps_value(x);
  return ft;
}

Var final_loss_to_targets(Tape& t, const std::vector<FrameTarget>& video,
                          const std::vector<Var>& rollout, const LossWeights& w,
                          const FeatureExtractor& phi, const PyramidSpec& spec) {
  std::vector<Var> xs;
  std::vector<const FrameTarget*> targets;
  xs.reserve(video.size());
  targets.reserve(video.size());
  for (const FrameTarget& ft : video) {
    xs.push_back(t.constant(ft.x));
    targets.push_back(&ft);
  }
  return final_loss_impl(t, xs, targets, rollout, w, phi, spec);
}

Var sr_loss(Tape& t, Var x_lr, Var xhat_hr, int scale, const LossWeights& w,
            const FeatureExtractor& phi, const PyramidSpec& spec, DownKernel dsc_kernel) {
  w.validate();
  if (scale < 1) throw ConfigError("sr_loss: scale must be >= 1");
  const Shape& hs = t.value(xhat_hr).shape();
  if (hs.ndim() != 3) throw ShapeError("sr_loss: prediction must be [C,H,W], got " + hs.str());
  if (hs[1] % scale != 0 || hs[2] % scale != 0)
    throw ShapeError("sr_loss: prediction " + hs.str() + " not divisible by scale " +
                     std::to_string(scale));
  Var down = downsample(t, xhat_hr, scale, dsc_kernel);
  const Shape& ls = t.value(x_lr).shape();
  if (t.value(down).shape() != ls)
    throw ShapeError("sr_loss: downscaled prediction is " + t.value(down).shape().str() +
                     " but the low-res input is " + ls.str() + "; wrong scale?");
  std::vector<Var> terms;
  if (w.rec > 0.0) terms.push_back(t.scale(rec_loss(t, x_lr, down, phi), w.rec));
  if (w.spl > 0.0) terms.push_back(t.scale(pyramid_loss(t, x_lr, down, spec), w.spl));
  if (w.var > 0.0) terms.push_back(t.scale(variation_loss(t, xhat_hr), w.var));
  return sum_terms(t, terms);
}

Var removal_loss(Tape& t, Var x, const Tensor& mask, Var xhat, const LossWeights& w,
                 const FeatureExtractor& phi, const PyramidSpec& spec) {
  w.validate();
  check_same_shape(t.value(x), t.value(xhat), "removal_loss frames");
  const Shape& s = t.value(x).shape();
  if (s.ndim() != 3) throw ShapeError("removal_loss: frames must be [C,H,W], got " + s.str());
  Var m = t.constant(broadcast_mask(mask, s));
  Var mx = t.mul(x, m), mh = t.mul(xhat, m);
  std::vector<Var> terms;
  if (w.rec > 0.0) terms.push_back(t.scale(rec_loss(t, mx, mh, phi), w.rec));
  if (w.spl > 0.0) terms.push_back(t.scale(pyramid_loss(t, mx, mh, spec), w.spl));
  if (w.var > 0.0) terms.push_back(t.scale(variation_loss(t, xhat), w.var));
  return sum_terms(t, terms);
}

}  // namespace vdp::losses
