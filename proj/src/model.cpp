// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0

#include "vdp/model.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "vdp/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian float32");

namespace vdp::model {

namespace {

constexpr uint64_t kZ0Stream = 0x7a30;    // initial-latent substream
constexpr uint64_t kInitStream = 0x1217;  // weight-init substream

void fill_uniform(Tensor& t, Rng& rng, double bound) {
  for (int64_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<float>(rng.uniform(-bound, bound));
}

}  // namespace

ParamLeaf& LeafStore::add(std::string name, Tensor init) {
  leaves_.emplace_back(std::move(name), std::move(init));
  return leaves_.back();
}

ParamLeaf* LeafStore::find(const std::string& name) {
  for (ParamLeaf& l : leaves_)
    if (l.name == name) return &l;
  return nullptr;
}

int ModelConfig::resolved_depth() const {
  if (depth >= 0) return depth;
  int l = 0;
  while (l < 6 && out_h % (1 << (l + 1)) == 0 && out_w % (1 << (l + 1)) == 0 &&
         (out_h >> (l + 1)) >= 4 && (out_w >> (l + 1)) >= 4)
    ++l;
  return l;
}

void ModelConfig::validate() const {
  if (d < 1) throw ConfigError("model: latent dimension must be >= 1, got " + std::to_string(d));
  if (hidden < 1) throw ConfigError("model: hidden size must be >= 1");
  if (lstm_layers < 1) throw ConfigError("model: lstm_layers must be >= 1");
  if (out_c < 1 || out_h < 2 || out_w < 2)
    throw ConfigError("model: output shape must be at least 1x2x2");
  const int l = resolved_depth();
  if (l < 0) throw ConfigError("model: depth must be >= 0");
  if (out_h % (1 << l) != 0 || out_w % (1 << l) != 0)
    throw ConfigError("model: output " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                      " not divisible by 2^depth with depth " + std::to_string(l));
  if (c0 < 1) throw ConfigError("model: c0 must be >= 1");
}

Tensor sample_initial_latent(uint64_t seed, int d) {
  if (d < 1) throw ConfigError("sample_initial_latent: d must be >= 1");
  Rng rng(Rng::mix(seed, kZ0Stream));
  Tensor z(Shape{d});
  for (int i = 0; i < d; ++i) z[i] = static_cast<float>(rng.normal());
  return z;
}

VdpModel::VdpModel(ModelConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(Rng::mix(cfg_.seed, kInitStream));
  const int d = cfg_.d, hd = cfg_.hidden;

  auto add_linear = [&](const std::string& name, int dout, int din, ParamLeaf*& w,
                        ParamLeaf*& b) {
    const double k = 1.0 / std::sqrt(static_cast<double>(din));
    Tensor wt(Shape{dout, din}), bt(Shape{dout});
    fill_uniform(wt, rng, k);
    fill_uniform(bt, rng, k);
    w = &store_.add(name + ".w", std::move(wt));
    b = &store_.add(name + ".b", std::move(bt));
  };

  add_linear("lfp.in", hd, d, in_w_, in_b_);
  lstm_.resize(static_cast<size_t>(cfg_.lstm_layers));
  for (int l = 0; l < cfg_.lstm_layers; ++l) {
    const std::string base = "lfp.l" + std::to_string(l);
    const double k = 1.0 / std::sqrt(static_cast<double>(hd));
    Tensor w_ih(Shape{4 * hd, hd}), w_hh(Shape{4 * hd, hd}), b_ih(Shape{4 * hd}),
        b_hh(Shape{4 * hd});
    fill_uniform(w_ih, rng, k);
    fill_uniform(w_hh, rng, k);
    fill_uniform(b_ih, rng, k);
    fill_uniform(b_hh, rng, k);
    // Forget-gate rows start positive so early cell state persists.
    for (int u = 0; u < hd; ++u) b_ih[hd + u] += 1.0f;
    lstm_[static_cast<size_t>(l)] = {&store_.add(base + ".w_ih", std::move(w_ih)),
                                     &store_.add(base + ".w_hh", std::move(w_hh)),
                                     &store_.add(base + ".b_ih", std::move(b_ih)),
                                     &store_.add(base + ".b_hh", std::move(b_hh))};
  }
  add_linear("lfp.out", d, hd, out_w_, out_b_);

  const int L = cfg_.resolved_depth();
  const int h0 = cfg_.base_h(), w0 = cfg_.base_w();
  add_linear("fd.proj", cfg_.c0 * h0 * w0, d, proj_w_, proj_b_);

  int in_ch = cfg_.c0;
  for (int i = 0; i < L; ++i) {
    const int conv_ch = std::max(cfg_.min_conv_channels, cfg_.c0 >> (i + 1));
    const std::string base = "fd.b" + std::to_string(i);
    const double k = 1.0 / std::sqrt(static_cast<double>(in_ch) * 9.0);
    Tensor wt(Shape{conv_ch, in_ch, 3, 3});
    fill_uniform(wt, rng, k);
    Block blk;
    blk.conv_w = &store_.add(base + ".conv.w", std::move(wt));
    blk.gamma = &store_.add(base + ".bn.gamma", Tensor::full(Shape{conv_ch}, 1.0f));
    blk.beta = &store_.add(base + ".bn.beta", Tensor::zeros(Shape{conv_ch}));
    blk.in_ch = in_ch;
    blk.conv_ch = conv_ch;
    blocks_.push_back(blk);
    in_ch = conv_ch + in_ch;  // concatenation skip widens the next stage
  }
  {
    const double k = 1.0 / std::sqrt(static_cast<double>(in_ch) * 9.0);
    Tensor wt(Shape{cfg_.out_c, in_ch, 3, 3}), bt(Shape{cfg_.out_c});
    fill_uniform(wt, rng, k);
    fill_uniform(bt, rng, k);
    final_w_ = &store_.add("fd.final.w", std::move(wt));
    final_b_ = &store_.add("fd.final.b", std::move(bt));
  }

  z0_ = sample_initial_latent(cfg_.seed, d);
  if (cfg_.train_z0) z0_leaf_ = &store_.add("z0", z0_);

  for (ParamLeaf& l : store_.all()) params_.add(l);
}

int64_t VdpModel::param_count() const {
  int64_t n = 0;
  for (const ParamLeaf& l : store_.all()) n += l.value.numel();
  return n;
}

int64_t VdpModel::estimate_epoch_bytes(int frames) const {
  // Node values plus matching gradient buffers, dominated by decoder
  // activations; parameters are registered once per rollout step for the
  // recurrence, so count those too.
  const int L = cfg_.resolved_depth();
  int64_t per_frame = 0;
  int in_ch = cfg_.c0;
  int h = cfg_.base_h(), w = cfg_.base_w();
  per_frame += static_cast<int64_t>(cfg_.c0) * h * w * 2;
  for (int i = 0; i < L; ++i) {
    const int conv_ch = blocks_[static_cast<size_t>(i)].conv_ch;
    h *= 2;
    w *= 2;
    // upsample + conv + bn + activation + concat
    per_frame += static_cast<int64_t>(h) * w * (in_ch + 3 * conv_ch + (in_ch + conv_ch));
    in_ch += conv_ch;
  }
  per_frame += static_cast<int64_t>(cfg_.out_c) * cfg_.out_h * cfg_.out_w * 2;
  int64_t lstm_nodes = static_cast<int64_t>(frames) *
                       (static_cast<int64_t>(cfg_.lstm_layers) * 13 * cfg_.hidden + 2 * cfg_.d);
  int64_t param_nodes = static_cast<int64_t>(frames) * param_count();
  return (static_cast<int64_t>(frames) * per_frame + lstm_nodes + param_nodes) * 2 * 4 * 3 / 2;
}

void VdpModel::set_z0(Tensor z) {
  if (z.shape() != Shape{cfg_.d})
    throw ShapeError("set_z0: expected [" + std::to_string(cfg_.d) + "], got " + z.shape().str());
  z0_ = std::move(z);
  if (z0_leaf_) z0_leaf_->value = z0_;
}

LstmState VdpModel::initial_state(Tape& t) const {
  LstmState s;
  for (int l = 0; l < cfg_.lstm_layers; ++l)
    s.hc.emplace_back(t.constant(Tensor::zeros(Shape{cfg_.hidden})),
                      t.constant(Tensor::zeros(Shape{cfg_.hidden})));
  return s;
}

Var VdpModel::lfpnet_step(Tape& t, Var z, LstmState& state) {
  Var x = t.linear(z, t.param(*in_w_), t.param(*in_b_));
  for (int l = 0; l < cfg_.lstm_layers; ++l) {
    auto& leaves = lstm_[static_cast<size_t>(l)];
    diff::LstmGateVars gv{t.param(*leaves.w_ih), t.param(*leaves.w_hh), t.param(*leaves.b_ih),
                          t.param(*leaves.b_hh)};
    auto& [h, c] = state.hc[static_cast<size_t>(l)];
    auto [hn, cn] = diff::lstm_cell(t, x, h, c, gv);
    h = hn;
    c = cn;
    x = hn;
  }
  Var z_next = t.tanh(t.linear(x, t.param(*out_w_), t.param(*out_b_)));
  if (!t.value(z_next).all_finite())
    throw NumericError("lfpnet_step: non-finite latent state");
  return z_next;
}

Var VdpModel::project(Tape& t, Var z) {
  Var flat = t.linear(z, t.param(*proj_w_), t.param(*proj_b_));
  return t.reshape(flat, Shape{cfg_.c0, cfg_.base_h(), cfg_.base_w()});
}

std::vector<Var> VdpModel::decode_batch(Tape& t, const std::vector<Var>& zs,
                                        std::vector<BnStats>* stats_out, bool* t1_fallback) {
  if (zs.empty()) throw ConfigError("decode_batch: empty latent list");
  if (t1_fallback) *t1_fallback = zs.size() == 1;
  if (stats_out) stats_out->clear();
  const int frames = static_cast<int>(zs.size());
  std::vector<Var> xs;
  xs.reserve(zs.size());
  for (Var z : zs) xs.push_back(project(t, z));
  for (const Block& blk : blocks_) {
    Var gamma = t.param(*blk.gamma), beta = t.param(*blk.beta);
    Var w = t.param(*blk.conv_w);
    Var b = t.constant(Tensor::zeros(Shape{blk.conv_ch}));
    std::vector<Var> us, ys;
    us.reserve(xs.size());
    ys.reserve(xs.size());
    for (Var x : xs) {
      Var u = t.upsample_nearest(x, 2);
      us.push_back(u);
      ys.push_back(t.conv2d(u, w, b, 1, 1));
    }
    BnStats st;
    Var yn = t.batch_norm(t.stack(ys), gamma, beta, 1e-5, &st);
    if (stats_out) stats_out->push_back(st);
    for (int i = 0; i < frames; ++i)
      xs[static_cast<size_t>(i)] = t.concat_c(t.leaky_relu(t.slice_t(yn, i)), us[static_cast<size_t>(i)]);
  }
  Var fw = t.param(*final_w_), fb = t.param(*final_b_);
  std::vector<Var> out;
  out.reserve(xs.size());
  for (Var x : xs) out.push_back(t.sigmoid(t.conv2d(x, fw, fb, 1, 1)));
  return out;
}

Var VdpModel::decode_frozen(Tape& t, Var z, const std::vector<BnStats>& stats) {
  if (stats.size() != blocks_.size())
    throw ConfigError("decode_frozen: expected " + std::to_string(blocks_.size()) +
                      " per-block statistics, got " + std::to_string(stats.size()));
  Var x = project(t, z);
  for (size_t i = 0; i < blocks_.size(); ++i) {
    const Block& blk = blocks_[i];
    Var u = t.upsample_nearest(x, 2);
    Var zb = t.constant(Tensor::zeros(Shape{blk.conv_ch}));
    Var y = t.conv2d(u, t.param(*blk.conv_w), zb, 1, 1);
    Var yn = t.bn_frozen(y, stats[i].mean, stats[i].var, t.param(*blk.gamma),
                         t.param(*blk.beta), 1e-5);
    x = t.concat_c(t.leaky_relu(yn), u);
  }
  return t.sigmoid(t.conv2d(x, t.param(*final_w_), t.param(*final_b_), 1, 1));
}

VdpModel::Rollout VdpModel::rollout(Tape& t, int frames, bool include_frame0) {
  if (frames < 1) throw ConfigError("rollout: frame count must be >= 1");
  Rollout r;
  Var z = z0_leaf_ ? t.param(*z0_leaf_) : t.constant(z0_);
  r.latents.push_back(z);
  LstmState state = initial_state(t);
  for (int i = 1; i < frames; ++i) {
    z = lfpnet_step(t, z, state);
    r.latents.push_back(z);
  }
  std::vector<Var> decode_list;
  r.decode_from = include_frame0 ? 0 : 1;
  for (size_t i = static_cast<size_t>(r.decode_from); i < r.latents.size(); ++i)
    decode_list.push_back(r.latents[i]);
  if (decode_list.empty())
    throw ConfigError("rollout: nothing to decode (single frame without frame 0)");
  r.frames = decode_batch(t, decode_list, &r.bn_stats, &r.t1_fallback);
  return r;
}

void save_tensors(const std::string& dir,
                  const std::vector<std::pair<std::string, Tensor>>& entries,
                  const std::string& stem) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path bin_path = fs::path(dir) / (stem + ".bin");
  const fs::path man_path = fs::path(dir) / (stem + ".manifest");
  std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
  if (!bin) throw IoError("cannot open for writing: " + bin_path.string());
  std::ostringstream man;
  man << "vdp-params-v1\n";
  man << "bin " << stem << ".bin\n";
  int64_t offset = 0;
  for (const auto& [name, tensor] : entries) {
    if (name.find_first_of(" \t\n") != std::string::npos)
      throw IoError("tensor name contains whitespace: '" + name + "'");
    man << name << " ";
    for (int a = 0; a < tensor.shape().ndim(); ++a) {
      if (a) man << ",";
      man << tensor.shape()[a];
    }
    man << " " << offset << "\n";
    bin.write(reinterpret_cast<const char*>(tensor.data()),
              static_cast<std::streamsize>(tensor.numel() * 4));
    offset += tensor.numel() * 4;
  }
  if (!bin) throw IoError("write failed: " + bin_path.string());
  bin.close();
  std::ofstream manifest(man_path, std::ios::trunc);
  if (!manifest) throw IoError("cannot open for writing: " + man_path.string());
  manifest << man.str();
  if (!manifest) throw IoError("write failed: " + man_path.string());
}

std::vector<std::pair<std::string, Tensor>> load_tensors(const std::string& dir,
                                                         const std::string& stem) {
  namespace fs = std::filesystem;
  const fs::path man_path = fs::path(dir) / (stem + ".manifest");
  std::ifstream manifest(man_path);
  if (!manifest) throw IoError("cannot open: " + man_path.string());
  std::string header;
  std::getline(manifest, header);
  if (header != "vdp-params-v1")
    throw IoError("unsupported checkpoint version in " + man_path.string() + ": '" + header + "'");
  std::string key, bin_name;
  manifest >> key >> bin_name;
  if (key != "bin") throw IoError("malformed manifest (missing bin line): " + man_path.string());
  const fs::path bin_path = fs::path(dir) / bin_name;
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw IoError("cannot open: " + bin_path.string());

  std::vector<std::pair<std::string, Tensor>> out;
  std::string name, shape_str;
  int64_t offset;
  while (manifest >> name >> shape_str >> offset) {
    std::vector<int> dims;
    std::stringstream ss(shape_str);
    std::string tok;
    while (std::getline(ss, tok, ',')) dims.push_back(std::stoi(tok));
    Tensor t((Shape(dims)));
    bin.seekg(offset);
    bin.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * 4));
    if (!bin)
      throw IoError("truncated checkpoint reading '" + name + "' from " + bin_path.string());
    out.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

void VdpModel::save_checkpoint(const std::string& dir) const {
  std::vector<std::pair<std::string, Tensor>> entries;
  for (const ParamLeaf& l : store_.all()) entries.emplace_back(l.name, l.value);
  if (!z0_leaf_) entries.emplace_back("z0", z0_);
  for (size_t i = 0; i < frozen_stats_.size(); ++i) {
    entries.emplace_back("frozen.b" + std::to_string(i) + ".mean", frozen_stats_[i].mean);
    entries.emplace_back("frozen.b" + std::to_string(i) + ".var", frozen_stats_[i].var);
  }
  save_tensors(dir, entries);
}

void VdpModel::load_checkpoint(const std::string& dir) {
  auto entries = load_tensors(dir);
  std::map<std::string, Tensor> by_name;
  for (auto& [name, tensor] : entries) by_name.emplace(std::move(name), std::move(tensor));
  for (ParamLeaf& l : store_.all()) {
    auto it = by_name.find(l.name);
    if (it == by_name.end()) throw IoError("checkpoint missing parameter '" + l.name + "'");
    if (it->second.shape() != l.value.shape())
      throw ShapeError("checkpoint parameter '" + l.name + "' has shape " +
                       it->second.shape().str() + ", expected " + l.value.shape().str());
    l.value = it->second;
  }
  if (auto it = by_name.find("z0"); it != by_name.end()) set_z0(it->second);
  std::vector<BnStats> stats;
  for (size_t i = 0;; ++i) {
    auto mit = by_name.find("frozen.b" + std::to_string(i) + ".mean");
    auto vit = by_name.find("frozen.b" + std::to_string(i) + ".var");
    if (mit == by_name.end() || vit == by_name.end()) break;
    stats.push_back(BnStats{mit->second, vit->second});
  }
  if (!stats.empty()) frozen_stats_ = std::move(stats);
}

}  // namespace vdp::model
