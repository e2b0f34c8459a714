// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end, split so every policy decision is library code:
// config-file parsing, flag layering, the run-config echo, and the seven
// command implementations all live here and are unit-tested; the binary in
// tools/ only maps argv onto FlagOverrides and translates exceptions into
// exit codes.
//
// Resolution order for every value: task defaults -> preset -> config file
// -> command-line flag. The echo written next to each run's outputs records
// the fully resolved configuration (seeds included) in the same key = value
// format the --config flag reads, so a run can be reproduced bit for bit by
// pointing --config at a previous echo. The output directory is the one
// value deliberately excluded: it must always be given on the command line,
// which keeps echoes relocatable and reports byte-identical across reruns.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vdp/degrade.hpp"
#include "vdp/tasks.hpp"

namespace vdp::cli {

// Exit-code contract: 0 success; 1 compute/IO failure; 2 usage, config, or
// input-validation error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCompute = 1;
inline constexpr int kExitUsage = 2;

// Fully resolved run description for one invocation.
struct RunConfig {
  std::string task;  // denoise|interpolate|superres|remove|degrade|analyze|metrics
  std::string in_dir;
  std::string out_dir;   // command line only, never persisted
  std::string mask_dir;  // remove
  std::string ref_dir;   // metrics reference sequence
  std::string preset;    // name the fit config was seeded from (echo comment)
  tasks::TaskConfig fit;
  int factor = 2;  // interpolation expansion factor
  degrade::NoiseSpec noise;
  bool noise_configured = false;  // a degradation mode was explicitly chosen
  int exp_seeds = 5;
  double tau = 2e-3;
  int jobs = 1;
};

// Flag values the user actually supplied; unset fields defer to the config
// file, the preset, and the task defaults, in that order.
struct FlagOverrides {
  std::optional<std::string> config_path;
  std::optional<std::string> in, out, mask, ref, preset;
  std::optional<uint64_t> seed;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<double> lambda_rec, lambda_spl, lambda_var;
  std::optional<std::string> ablate;
  std::optional<bool> early_stop;
  std::optional<int> scale;   // superres factor; degrade downscale mode
  std::optional<int> factor;  // interpolation expansion
  std::optional<double> gaussian;
  std::optional<double> poisson;
  std::optional<int> replace_frame;
  std::optional<uint64_t> noise_seed;
  std::optional<int> seeds;  // experiment seed count (seeds 1..n)
  std::optional<double> tau;
  std::optional<int> jobs;
};

// Flat `key = value` text with [section] headers and # comments. Keys are
// returned as "section.key" ("" section for keys above the first header);
// later duplicates overwrite earlier ones. Throws ConfigError with the line
// number on malformed input.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> load_config_file(const std::string& path);  // IoError

// Builds the resolved config for `task` by layering the preset, the config
// file named in `flags` (if any), and the flags themselves. Throws
// ConfigError on unknown keys, value parse failures, a preset or config
// `task` that contradicts the command, or contradictory degrade modes.
RunConfig resolve_run_config(const std::string& task, const FlagOverrides& flags);

// The resolved configuration in config-file form (excludes the output
// directory; section set depends on the task).
std::string echo_text(const RunConfig& rc);

// Command implementations. Each validates its required inputs, computes,
// and writes its artifacts under rc.out_dir; errors surface as exceptions
// (ConfigError/ShapeError for bad inputs, IoError/NumericError for
// failures). run_command dispatches on rc.task.
int cmd_denoise(const RunConfig& rc);
int cmd_interpolate(const RunConfig& rc);
int cmd_superres(const RunConfig& rc);
int cmd_remove(const RunConfig& rc);
int cmd_degrade(const RunConfig& rc);
int cmd_analyze(const RunConfig& rc);
int cmd_metrics(const RunConfig& rc);
int run_command(const RunConfig& rc);

}  // namespace vdp::cli
