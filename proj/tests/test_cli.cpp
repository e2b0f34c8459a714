// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "vdp/cli.hpp"
#include "vdp/errors.hpp"
#include "vdp/metrics.hpp"
#include "vdp/rng.hpp"
#include "vdp/videoio.hpp"

using vdp::ConfigError;
using vdp::IoError;
using vdp::Rng;
using vdp::Shape;
using vdp::Tensor;
using namespace vdp::cli;

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& stem) {
    path = fs::temp_directory_path() / (stem + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& sub = "") const {
    return sub.empty() ? path.string() : (path / sub).string();
  }
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

bool same_bytes(const fs::path& a, const fs::path& b) { return read_file(a) == read_file(b); }

vdp::videoio::VideoSequence make_video(int t, int h, int w, uint64_t seed) {
  Rng rng(seed);
  vdp::videoio::VideoSequence v;
  for (int i = 0; i < t; ++i) {
    Tensor f(Shape{3, h, w});
    for (int64_t j = 0; j < f.numel(); ++j) f[j] = static_cast<float>(rng.uniform01());
    v.frames.push_back(f);
  }
  return v;
}

// Config text that shrinks the model far enough for subsecond fits.
const char* kTinyModel =
    "[model]\n"
    "d = 16\n"
    "hidden = 16\n"
    "lstm_layers = 2\n"
    "c0 = 8\n"
    "[fit]\n"
    "epochs = 4\n"
    "use_features = false\n";

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("config text parses sections, comments, and whitespace") {
  const auto kv = parse_config_text(
      "# leading comment\n"
      "task = denoise\n"
      "\n"
      "[fit]\n"
      "  epochs =  42 \n"
      "lr = 0.001\n"
      "[io]\n"
      "in = /data/my frames\n"
      "[fit]\n"
      "epochs = 43\n");
  CHECK(kv.at("task") == "denoise");
  CHECK(kv.at("fit.epochs") == "43");  // later duplicate wins
  CHECK(kv.at("fit.lr") == "0.001");
  CHECK(kv.at("io.in") == "/data/my frames");  // values may contain spaces
  CHECK(kv.size() == 4);

  CHECK_THROWS_AS(parse_config_text("key_without_value\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[unclosed\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("bad key = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("= 1\n"), ConfigError);
}

TEST_CASE("resolution layers task defaults, preset, config file, and flags") {
  TempDir dir("vdp_cli_layers");
  write_file(dir.path / "run.cfg",
             "[fit]\n"
             "preset = desk-denoise\n"
             "epochs = 50\n"
             "lambda_spl = 0.25\n");

  // Flags beat config beats preset.
  FlagOverrides f;
  f.config_path = dir.str("run.cfg");
  f.epochs = 7;
  const RunConfig rc = resolve_run_config("denoise", f);
  CHECK(rc.preset == "desk-denoise");
  CHECK(rc.fit.epochs == 7);                  // flag override
  CHECK(rc.fit.weights.spl == 0.25);          // config override
  CHECK(rc.fit.lr == 1e-3);                   // desk preset value
  CHECK(rc.fit.model.hidden == 64);           // desk preset value
  CHECK(rc.fit.kind == vdp::tasks::TaskKind::denoise);

  // Without any inputs, the paper preset for the task applies.
  const RunConfig bare = resolve_run_config("superres", {});
  CHECK(bare.preset == "paper-superres");
  CHECK(bare.fit.epochs == 4200);
  CHECK(bare.fit.weights.spl == 0.01);

  // --preset beats the config file's preset.
  FlagOverrides g;
  g.config_path = dir.str("run.cfg");
  g.preset = std::string("paper-denoise");
  CHECK(resolve_run_config("denoise", g).fit.model.hidden == 1024);
  CHECK(resolve_run_config("denoise", g).fit.epochs == 50);  // config still applies
}

TEST_CASE("resolution rejects contradictions and unknown keys") {
  TempDir dir("vdp_cli_badcfg");

  CHECK_THROWS_AS(resolve_run_config("polish", {}), ConfigError);

  write_file(dir.path / "wrong_task.cfg", "task = superres\n");
  FlagOverrides f;
  f.config_path = dir.str("wrong_task.cfg");
  CHECK_THROWS_AS(resolve_run_config("denoise", f), ConfigError);

  write_file(dir.path / "unknown.cfg", "[fit]\nepoochs = 3\n");
  f.config_path = dir.str("unknown.cfg");
  CHECK_THROWS_AS(resolve_run_config("denoise", f), ConfigError);

  write_file(dir.path / "out.cfg", "[io]\nout = somewhere\n");
  f.config_path = dir.str("out.cfg");
  CHECK_THROWS_AS(resolve_run_config("denoise", f), ConfigError);

  f.config_path = dir.str("missing.cfg");
  CHECK_THROWS_AS(resolve_run_config("denoise", f), IoError);

  // Preset task kind must match the command.
  FlagOverrides g;
  g.preset = std::string("paper-superres");
  CHECK_THROWS_AS(resolve_run_config("denoise", g), ConfigError);
  g.preset = std::string("paper-denoise");
  CHECK_NOTHROW(resolve_run_config("analyze", g));
  g.preset = std::string("paper-removal");
  CHECK_THROWS_AS(resolve_run_config("analyze", g), ConfigError);
}

TEST_CASE("degradation flags are policed per command") {
  FlagOverrides f;
  f.gaussian = 20.0;
  f.poisson = 25.0;
  CHECK_THROWS_AS(resolve_run_config("degrade", f), ConfigError);

  FlagOverrides g;
  g.gaussian = 20.0;
  CHECK_THROWS_AS(resolve_run_config("denoise", g), ConfigError);
  CHECK_THROWS_AS(resolve_run_config("analyze", g), ConfigError);
  const RunConfig rc = resolve_run_config("degrade", g);
  CHECK(rc.noise_configured);
  CHECK(rc.noise.kind == vdp::degrade::NoiseKind::gaussian);
  CHECK(rc.noise.sigma == 20.0);

  // --scale means downscale on degrade, upscale factor on superres.
  FlagOverrides s;
  s.scale = 2;
  CHECK(resolve_run_config("degrade", s).noise.kind == vdp::degrade::NoiseKind::downscale);
  CHECK(resolve_run_config("superres", s).fit.scale == 2);

  FlagOverrides r;
  r.replace_frame = 1;
  r.noise_seed = uint64_t{9};
  const RunConfig ar = resolve_run_config("analyze", r);
  CHECK(ar.noise.kind == vdp::degrade::NoiseKind::frame_replace);
  CHECK(ar.noise.frames == std::vector<int>{1});
  CHECK(ar.noise.seed == 9);
}

TEST_CASE("echo text reloads to the identical resolved configuration") {
  FlagOverrides f;
  f.preset = std::string("desk-superres");
  f.seed = uint64_t{11};
  f.lr = 7.5e-4;
  f.scale = 2;
  f.in = std::string("frames");
  f.out = std::string("outdir");
  const RunConfig rc = resolve_run_config("superres", f);

  TempDir dir("vdp_cli_echo");
  write_file(dir.path / "echo.cfg", echo_text(rc));
  FlagOverrides g;
  g.config_path = dir.str("echo.cfg");
  g.out = std::string("elsewhere");
  const RunConfig back = resolve_run_config("superres", g);

  CHECK(back.preset == rc.preset);
  CHECK(back.in_dir == rc.in_dir);
  CHECK(back.fit.seed == rc.fit.seed);
  CHECK(back.fit.epochs == rc.fit.epochs);
  CHECK(back.fit.lr == rc.fit.lr);  // bit-exact via shortest round-trip text
  CHECK(back.fit.weights.rec == rc.fit.weights.rec);
  CHECK(back.fit.weights.spl == rc.fit.weights.spl);
  CHECK(back.fit.weights.var == rc.fit.weights.var);
  CHECK(back.fit.scale == rc.fit.scale);
  CHECK(back.fit.model.d == rc.fit.model.d);
  CHECK(back.fit.model.hidden == rc.fit.model.hidden);
  CHECK(back.fit.feature_seed == rc.fit.feature_seed);
  // The output directory never round-trips: it is command-line only.
  CHECK(echo_text(rc).find("outdir") == std::string::npos);
  CHECK(back.out_dir == "elsewhere");
  // The reloaded config echoes to the identical text.
  CHECK(echo_text(back) == echo_text(rc));
}

TEST_CASE("denoise command writes every artifact and reruns bit-identically") {
  TempDir dir("vdp_cli_denoise");
  const auto video = make_video(2, 16, 16, 77);
  vdp::videoio::save_frames(video, dir.str("frames"));
  write_file(dir.path / "tiny.cfg", kTinyModel);

  FlagOverrides f;
  f.config_path = dir.str("tiny.cfg");
  f.preset = std::string("desk-denoise");
  f.in = dir.str("frames");
  f.out = dir.str("run1");
  const RunConfig rc = resolve_run_config("denoise", f);
  CHECK(run_command(rc) == kExitOk);

  CHECK(fs::exists(dir.path / "run1/frame_00000.png"));
  CHECK(fs::exists(dir.path / "run1/frame_00001.png"));
  CHECK(fs::exists(dir.path / "run1/metrics.json"));
  CHECK(fs::exists(dir.path / "run1/curves.csv"));
  CHECK(fs::exists(dir.path / "run1/run-config.echo"));

  const auto report = vdp::metrics::load_json(dir.path / "run1/metrics.json");
  CHECK(report.psnr_frames.size() == 2);
  CHECK(report.curves.size() == 4);  // total, rec, spl, var (JSON sorts names)
  const auto total = std::find_if(report.curves.begin(), report.curves.end(),
                                  [](const auto& c) { return c.first == "total"; });
  REQUIRE(total != report.curves.end());
  CHECK(total->second.size() == 4);  // tiny config epochs
  CHECK(report.config_echo == read_file(dir.path / "run1/run-config.echo"));

  // Rerunning from the echo reproduces every artifact byte for byte.
  FlagOverrides g;
  g.config_path = dir.str("run1/run-config.echo");
  g.out = dir.str("run2");
  const RunConfig rc2 = resolve_run_config("denoise", g);
  CHECK(run_command(rc2) == kExitOk);
  for (const char* name : {"frame_00000.png", "frame_00001.png", "metrics.json", "curves.csv",
                           "run-config.echo"}) {
    CHECK(same_bytes(dir.path / "run1" / name, dir.path / "run2" / name));
  }
}

TEST_CASE("metrics command compares directories and self-compare is perfect") {
  TempDir dir("vdp_cli_metrics");
  const auto video = make_video(2, 16, 16, 5);
  vdp::videoio::save_frames(video, dir.str("a"));

  FlagOverrides f;
  f.in = dir.str("a");
  f.ref = dir.str("a");
  f.out = dir.str("rep");
  CHECK(run_command(resolve_run_config("metrics", f)) == kExitOk);
  const auto report = vdp::metrics::load_json(dir.path / "rep/metrics.json");
  CHECK(report.psnr_mean == 99.0);
  CHECK(report.ssim_mean == 1.0);

  FlagOverrides missing;
  missing.in = dir.str("a");
  missing.out = dir.str("rep2");
  CHECK_THROWS_AS(run_command(resolve_run_config("metrics", missing)), ConfigError);
}

TEST_CASE("commands demand their required inputs") {
  FlagOverrides none;
  CHECK_THROWS_AS(run_command(resolve_run_config("denoise", none)), ConfigError);

  TempDir dir("vdp_cli_required");
  FlagOverrides f;
  f.in = dir.str("frames");
  CHECK_THROWS_AS(run_command(resolve_run_config("denoise", f)), ConfigError);

  const auto video = make_video(2, 16, 16, 3);
  vdp::videoio::save_frames(video, dir.str("frames"));
  f.out = dir.str("out");
  CHECK_THROWS_AS(run_command(resolve_run_config("remove", f)), ConfigError);   // no mask
  CHECK_THROWS_AS(run_command(resolve_run_config("degrade", f)), ConfigError);  // no mode
}

TEST_SUITE_END();
