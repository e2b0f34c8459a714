// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vdp/adam.hpp"
#include "vdp/rng.hpp"
#include "vdp/tape.hpp"

namespace vdp::model {

using diff::BnStats;
using diff::ParamLeaf;
using diff::ParamSet;
using diff::Tape;
using diff::Var;

// Owns named parameter leaves with stable addresses.
class LeafStore {
 public:
  ParamLeaf& add(std::string name, Tensor init);
  ParamLeaf* find(const std::string& name);
  std::deque<ParamLeaf>& all() { return leaves_; }
  const std::deque<ParamLeaf>& all() const { return leaves_; }

 private:
  std::deque<ParamLeaf> leaves_;
};

struct ModelConfig {
  int d = 1024;         // latent dimension
  int hidden = 1024;    // LSTM cells per layer
  int lstm_layers = 4;  // stacked recurrent layers
  int out_c = 3, out_h = 64, out_w = 64;
  int c0 = 64;    // channels of the projected seed grid
  int depth = -1;  // decoder up-blocks L; -1 derives the largest L with a
                   // base grid of at least 4x4 (H, W must divide by 2^L)
  int min_conv_channels = 4;
  uint64_t seed = 1;
  bool train_z0 = false;

  int resolved_depth() const;
  int base_h() const { return out_h >> resolved_depth(); }
  int base_w() const { return out_w >> resolved_depth(); }
  void validate() const;  // throws ConfigError
};

// Draws the frozen initial latent, i.i.d. standard normal.
Tensor sample_initial_latent(uint64_t seed, int d);

// Per-layer recurrent state as tape nodes.
struct LstmState {
  std::vector<std::pair<Var, Var>> hc;  // (h, c) per layer
};

// The VDP network pair. Construction initializes all leaves from the config
// seed; the same instance is reused across epochs (fresh Tape per epoch).
class VdpModel {
 public:
  explicit VdpModel(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  ParamSet& param_set() { return params_; }
  LeafStore& leaves() { return store_; }
  int64_t param_count() const;
  // Rough bytes needed for one training epoch's graph (values + grads).
  int64_t estimate_epoch_bytes(int frames) const;

  const Tensor& z0() const { return z0_; }
  void set_z0(Tensor z);

  // Latent advance z -> tanh(linear(h_last)); threads recurrent state.
  Var lfpnet_step(Tape& t, Var z, LstmState& state);
  LstmState initial_state(Tape& t) const;

  // Joint decode of a latent batch; batch-norm statistics are computed over
  // the batch and reported per block. Decoding a single frame falls back to
  // instance statistics and sets *t1_fallback.
  std::vector<Var> decode_batch(Tape& t, const std::vector<Var>& zs,
                                std::vector<BnStats>* stats_out = nullptr,
                                bool* t1_fallback = nullptr);
  // Decode one latent under externally fixed batch-norm statistics.
  Var decode_frozen(Tape& t, Var z, const std::vector<BnStats>& stats);

  struct Rollout {
    std::vector<Var> latents;  // z_0 .. z_{T-1}
    std::vector<Var> frames;   // f(z_t) for each decoded t (see decode_from)
    int decode_from = 0;       // 0: frames cover all latents; 1: from z_1
    std::vector<BnStats> bn_stats;
    bool t1_fallback = false;
  };
  // Rolls the recurrence from frozen z_0 with zeroed LSTM state and decodes
  // the latents as one batch. include_frame0 = false skips f(z_0).
  Rollout rollout(Tape& t, int frames, bool include_frame0 = true);

  // Frozen statistics captured from the last fit, used by post-fit decodes.
  void set_frozen_stats(std::vector<BnStats> stats) { frozen_stats_ = std::move(stats); }
  const std::vector<BnStats>& frozen_stats() const { return frozen_stats_; }

  void save_checkpoint(const std::string& dir) const;
  void load_checkpoint(const std::string& dir);

 private:
  struct Block {
    // No conv bias: batch norm subtracts the channel mean, so a bias before
    // it would be a dead parameter.
    ParamLeaf *conv_w, *gamma, *beta;
    int in_ch, conv_ch;
  };

  Var project(Tape& t, Var z);

  ModelConfig cfg_;
  LeafStore store_;
  ParamSet params_;
  Tensor z0_;
  ParamLeaf* z0_leaf_ = nullptr;  // only when train_z0

  ParamLeaf *in_w_, *in_b_, *out_w_, *out_b_;
  struct LstmLayerLeaves {
    ParamLeaf *w_ih, *w_hh, *b_ih, *b_hh;
  };
  std::vector<LstmLayerLeaves> lstm_;
  ParamLeaf *proj_w_, *proj_b_;
  std::vector<Block> blocks_;
  ParamLeaf *final_w_, *final_b_;
  std::vector<BnStats> frozen_stats_;
};

// Flat-binary tensor archive with a text manifest; little-endian float32.
// Shared by model checkpoints and feature-network import files.
void save_tensors(const std::string& dir,
                  const std::vector<std::pair<std::string, Tensor>>& entries,
                  const std::string& stem = "params");
std::vector<std::pair<std::string, Tensor>> load_tensors(const std::string& dir,
                                                         const std::string& stem = "params");

}  // namespace vdp::model
