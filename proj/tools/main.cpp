// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0
//
// vdp command-line binary. All behavior lives in the library (vdp/cli.hpp);
// this file only maps argv onto FlagOverrides and exceptions onto the exit
// code contract (0 success, 1 compute/IO failure, 2 usage/config error).

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "vdp/cli.hpp"
#include "vdp/errors.hpp"

namespace {

struct FlagVars {
  std::string config, in, out, mask, ref, preset, ablate;
  uint64_t seed = 0, noise_seed = 0;
  int epochs = 0, scale = 0, factor = 0, replace_frame = 0, seeds = 0, jobs = 0;
  double lr = 0, lambda_rec = 0, lambda_spl = 0, lambda_var = 0;
  double gaussian = 0, poisson = 0, tau = 0;
  bool early_stop = false;
};

void add_io_flags(CLI::App* sc, FlagVars& v) {
  sc->add_option("--in", v.in, "input frame directory (frame_%05d.png)");
  sc->add_option("--out", v.out, "output directory (required; never read from config)");
  sc->add_option("--config", v.config, "key = value config file; flags override it");
}

void add_fit_flags(CLI::App* sc, FlagVars& v) {
  sc->add_option("--preset", v.preset, "hyperparameter preset (paper-*/desk-*)");
  sc->add_option("--seed", v.seed, "model initialization seed");
  sc->add_option("--epochs", v.epochs, "optimization epochs");
  sc->add_option("--lr", v.lr, "Adam learning rate");
  sc->add_option("--lambda-rec", v.lambda_rec, "reconstruction loss weight");
  sc->add_option("--lambda-spl", v.lambda_spl, "spatial pyramid loss weight");
  sc->add_option("--lambda-var", v.lambda_var, "variation loss weight");
  sc->add_option("--ablate", v.ablate, "loss subset: rec|rec+var|rec+spl|all");
  sc->add_flag("--early-stop", v.early_stop, "stop at the first loss plateau");
}

vdp::cli::FlagOverrides collect(CLI::App* sc, const FlagVars& v) {
  vdp::cli::FlagOverrides f;
  const auto opt = [&](const char* name) { return sc->count(name) > 0; };
  if (opt("--config")) f.config_path = v.config;
  if (opt("--in")) f.in = v.in;
  if (opt("--out")) f.out = v.out;
  if (sc->get_option_no_throw("--mask") && opt("--mask")) f.mask = v.mask;
  if (sc->get_option_no_throw("--ref") && opt("--ref")) f.ref = v.ref;
  if (sc->get_option_no_throw("--preset")) {
    if (opt("--preset")) f.preset = v.preset;
    if (opt("--seed")) f.seed = v.seed;
    if (opt("--epochs")) f.epochs = v.epochs;
    if (opt("--lr")) f.lr = v.lr;
    if (opt("--lambda-rec")) f.lambda_rec = v.lambda_rec;
    if (opt("--lambda-spl")) f.lambda_spl = v.lambda_spl;
    if (opt("--lambda-var")) f.lambda_var = v.lambda_var;
    if (opt("--ablate")) f.ablate = v.ablate;
    if (opt("--early-stop")) f.early_stop = true;
  }
  if (sc->get_option_no_throw("--scale") && opt("--scale")) f.scale = v.scale;
  if (sc->get_option_no_throw("--factor") && opt("--factor")) f.factor = v.factor;
  if (sc->get_option_no_throw("--gaussian") && opt("--gaussian")) f.gaussian = v.gaussian;
  if (sc->get_option_no_throw("--poisson") && opt("--poisson")) f.poisson = v.poisson;
  if (sc->get_option_no_throw("--replace-frame") && opt("--replace-frame")) {
    f.replace_frame = v.replace_frame;
  }
  if (sc->get_option_no_throw("--noise-seed") && opt("--noise-seed")) {
    f.noise_seed = v.noise_seed;
  }
  if (sc->get_option_no_throw("--seeds") && opt("--seeds")) f.seeds = v.seeds;
  if (sc->get_option_no_throw("--tau") && opt("--tau")) f.tau = v.tau;
  if (sc->get_option_no_throw("--jobs") && opt("--jobs")) f.jobs = v.jobs;
  return f;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vdp: per-video recurrent prior for denoising, frame interpolation, "
               "super-resolution, and object removal"};
  app.require_subcommand(1);
  FlagVars v;

  CLI::App* denoise = app.add_subcommand("denoise", "restore a noisy sequence");
  add_io_flags(denoise, v);
  add_fit_flags(denoise, v);

  CLI::App* interpolate = app.add_subcommand("interpolate", "synthesize in-between frames");
  add_io_flags(interpolate, v);
  add_fit_flags(interpolate, v);
  interpolate->add_option("--factor", v.factor, "temporal expansion factor");

  CLI::App* superres = app.add_subcommand("superres", "upscale a low-resolution sequence");
  add_io_flags(superres, v);
  add_fit_flags(superres, v);
  superres->add_option("--scale", v.scale, "spatial upscale factor (2|4|8)");

  CLI::App* remove = app.add_subcommand("remove", "synthesize masked-out regions");
  add_io_flags(remove, v);
  add_fit_flags(remove, v);
  remove->add_option("--mask", v.mask, "mask directory (mask.png or mask_%05d.png)");

  CLI::App* degrade = app.add_subcommand("degrade", "apply a deterministic corruption");
  add_io_flags(degrade, v);
  degrade->add_option("--gaussian", v.gaussian, "additive Gaussian noise sigma ([0,255] units)");
  degrade->add_option("--poisson", v.poisson, "additive Poisson noise intensity");
  degrade->add_option("--replace-frame", v.replace_frame, "replace frame i with uniform noise");
  degrade->add_option("--scale", v.scale, "downscale by an integer factor");
  degrade->add_option("--noise-seed", v.noise_seed, "noise generator seed");

  CLI::App* analyze = app.add_subcommand("analyze", "five-setting convergence study");
  add_io_flags(analyze, v);
  add_fit_flags(analyze, v);
  analyze->add_option("--replace-frame", v.replace_frame, "corrupted frame index (default T/2)");
  analyze->add_option("--noise-seed", v.noise_seed, "noise generator seed");
  analyze->add_option("--seeds", v.seeds, "number of model seeds (1..n)");
  analyze->add_option("--tau", v.tau, "MSE-to-input threshold for epochs-to-fit");
  analyze->add_option("--jobs", v.jobs, "parallel fits");

  CLI::App* metrics = app.add_subcommand("metrics", "compare two frame directories");
  add_io_flags(metrics, v);
  metrics->add_option("--ref", v.ref, "reference frame directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? vdp::cli::kExitOk : vdp::cli::kExitUsage;
  }

  CLI::App* sc = app.get_subcommands().front();
  try {
    const vdp::cli::RunConfig rc = vdp::cli::resolve_run_config(sc->get_name(), collect(sc, v));
    return vdp::cli::run_command(rc);
  } catch (const vdp::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return vdp::cli::kExitUsage;
  } catch (const vdp::ShapeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return vdp::cli::kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return vdp::cli::kExitCompute;
  }
}
