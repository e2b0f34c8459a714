// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0

#include "vdp/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>

#include <json.hpp>

#include "vdp/errors.hpp"
#include "vdp/experiment.hpp"
#include "vdp/metrics.hpp"
#include "vdp/videoio.hpp"

namespace vdp::cli {

namespace {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Value formatting and parsing. Doubles use shortest-round-trip formatting so
// an echo reloads to the exact bits it was written from.

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* expected) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  bad_value(key, value, "a bool (true|false)");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, const char* expected) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  const auto res = std::from_chars(first, last, out);
  if (res.ec != std::errc() || res.ptr != last) bad_value(key, value, expected);
  return out;
}

int parse_int(const std::string& key, const std::string& value) {
  return parse_number<int>(key, value, "an integer");
}

int64_t parse_i64(const std::string& key, const std::string& value) {
  return parse_number<int64_t>(key, value, "an integer");
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
  return parse_number<uint64_t>(key, value, "an unsigned integer");
}

double parse_f64(const std::string& key, const std::string& value) {
  return parse_number<double>(key, value, "a number");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  if (value.empty()) return out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int(key, item));
  return out;
}

std::string fmt_int_list(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

const char* kernel_name(losses::DownKernel k) {
  return k == losses::DownKernel::area ? "area" : "cubic";
}

losses::DownKernel kernel_from_name(const std::string& key, const std::string& value) {
  if (value == "area") return losses::DownKernel::area;
  if (value == "cubic") return losses::DownKernel::cubic;
  bad_value(key, value, "a downsampler kernel (area|cubic)");
}

std::string trim(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// ---------------------------------------------------------------------------
// Task bookkeeping.

const std::vector<std::string>& known_tasks() {
  static const std::vector<std::string> tasks = {
      "denoise", "interpolate", "superres", "remove", "degrade", "analyze", "metrics"};
  return tasks;
}

bool task_has_fit(const std::string& task) {
  return task == "denoise" || task == "interpolate" || task == "superres" ||
         task == "remove" || task == "analyze";
}

tasks::TaskKind kind_for_task(const std::string& task) {
  if (task == "denoise" || task == "analyze") return tasks::TaskKind::denoise;
  if (task == "interpolate") return tasks::TaskKind::interpolate;
  if (task == "superres") return tasks::TaskKind::superres;
  return tasks::TaskKind::removal;  // "remove"
}

std::string default_preset(const std::string& task) {
  if (task == "interpolate") return "paper-interpolation";
  if (task == "superres") return "paper-superres";
  if (task == "remove") return "paper-removal";
  return "paper-denoise";  // denoise, analyze
}

// ---------------------------------------------------------------------------
// Config application.

void apply_config_map(RunConfig& rc, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "task" || key == "fit.preset") continue;  // resolved beforehand
    if (key == "io.in") {
      rc.in_dir = value;
    } else if (key == "io.mask") {
      rc.mask_dir = value;
    } else if (key == "io.ref") {
      rc.ref_dir = value;
    } else if (key == "io.out") {
      throw ConfigError("the output directory is command-line only; pass --out");
    } else if (key == "fit.seed") {
      rc.fit.seed = parse_u64(key, value);
    } else if (key == "fit.epochs") {
      rc.fit.epochs = parse_int(key, value);
    } else if (key == "fit.lr") {
      rc.fit.lr = parse_f64(key, value);
    } else if (key == "fit.lambda_rec") {
      rc.fit.weights.rec = parse_f64(key, value);
    } else if (key == "fit.lambda_spl") {
      rc.fit.weights.spl = parse_f64(key, value);
    } else if (key == "fit.lambda_var") {
      rc.fit.weights.var = parse_f64(key, value);
    } else if (key == "fit.ablate") {
      rc.fit.ablate = tasks::ablation_from_name(value);
    } else if (key == "fit.early_stop") {
      rc.fit.early_stop = parse_bool(key, value);
    } else if (key == "fit.plateau_window") {
      rc.fit.plateau_window = parse_int(key, value);
    } else if (key == "fit.plateau_tol") {
      rc.fit.plateau_tol = parse_f64(key, value);
    } else if (key == "fit.scale") {
      rc.fit.scale = parse_int(key, value);
    } else if (key == "fit.factor") {
      rc.factor = parse_int(key, value);
    } else if (key == "fit.supervise_frame0") {
      rc.fit.supervise_frame0 = parse_bool(key, value);
    } else if (key == "fit.use_features") {
      rc.fit.use_features = parse_bool(key, value);
    } else if (key == "fit.feature_seed") {
      rc.fit.feature_seed = parse_u64(key, value);
    } else if (key == "fit.sr_kernel") {
      rc.fit.sr_kernel = kernel_from_name(key, value);
    } else if (key == "fit.pyramid_factors") {
      rc.fit.pyramid_factors = parse_int_list(key, value);
    } else if (key == "fit.max_graph_bytes") {
      rc.fit.max_graph_bytes = parse_i64(key, value);
    } else if (key == "model.d") {
      rc.fit.model.d = parse_int(key, value);
    } else if (key == "model.hidden") {
      rc.fit.model.hidden = parse_int(key, value);
    } else if (key == "model.lstm_layers") {
      rc.fit.model.lstm_layers = parse_int(key, value);
    } else if (key == "model.c0") {
      rc.fit.model.c0 = parse_int(key, value);
    } else if (key == "model.depth") {
      rc.fit.model.depth = parse_int(key, value);
    } else if (key == "model.min_conv_channels") {
      rc.fit.model.min_conv_channels = parse_int(key, value);
    } else if (key == "model.train_z0") {
      rc.fit.model.train_z0 = parse_bool(key, value);
    } else if (key == "degrade.kind") {
      rc.noise.kind = degrade::kind_from_name(value);
      rc.noise_configured = true;
    } else if (key == "degrade.sigma") {
      rc.noise.sigma = parse_f64(key, value);
    } else if (key == "degrade.lambda") {
      rc.noise.lambda = parse_f64(key, value);
    } else if (key == "degrade.frames") {
      rc.noise.frames = parse_int_list(key, value);
    } else if (key == "degrade.scale") {
      rc.noise.scale = parse_int(key, value);
    } else if (key == "degrade.seed") {
      rc.noise.seed = parse_u64(key, value);
    } else if (key == "experiment.seeds") {
      rc.exp_seeds = parse_int(key, value);
    } else if (key == "experiment.tau") {
      rc.tau = parse_f64(key, value);
    } else if (key == "experiment.jobs") {
      rc.jobs = parse_int(key, value);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

void apply_flags(RunConfig& rc, const FlagOverrides& f) {
  if (f.in) rc.in_dir = *f.in;
  if (f.out) rc.out_dir = *f.out;
  if (f.mask) rc.mask_dir = *f.mask;
  if (f.ref) rc.ref_dir = *f.ref;
  if (f.seed) rc.fit.seed = *f.seed;
  if (f.epochs) rc.fit.epochs = *f.epochs;
  if (f.lr) rc.fit.lr = *f.lr;
  if (f.lambda_rec) rc.fit.weights.rec = *f.lambda_rec;
  if (f.lambda_spl) rc.fit.weights.spl = *f.lambda_spl;
  if (f.lambda_var) rc.fit.weights.var = *f.lambda_var;
  if (f.ablate) rc.fit.ablate = tasks::ablation_from_name(*f.ablate);
  if (f.early_stop) rc.fit.early_stop = *f.early_stop;
  if (f.factor) rc.factor = *f.factor;
  if (f.seeds) rc.exp_seeds = *f.seeds;
  if (f.tau) rc.tau = *f.tau;
  if (f.jobs) rc.jobs = *f.jobs;

  // Degradation modes are mutually exclusive; --scale doubles as the
  // superres factor elsewhere and the downscale mode on degrade.
  const bool noise_task = rc.task == "degrade" || rc.task == "analyze";
  int modes = 0;
  if (f.gaussian) ++modes;
  if (f.poisson) ++modes;
  if (f.replace_frame) ++modes;
  if (f.scale && rc.task == "degrade") ++modes;
  if (!noise_task && (f.gaussian || f.poisson || f.replace_frame || f.noise_seed)) {
    throw ConfigError("degradation flags only apply to the degrade and analyze commands");
  }
  if (modes > 1) {
    throw ConfigError("choose exactly one of --gaussian, --poisson, --replace-frame, --scale");
  }
  if (rc.task == "analyze" && (f.gaussian || f.poisson)) {
    throw ConfigError("analyze corrupts by frame replacement; use --replace-frame");
  }
  if (f.scale) {
    if (rc.task == "degrade") {
      rc.noise.kind = degrade::NoiseKind::downscale;
      rc.noise.scale = *f.scale;
      rc.noise_configured = true;
    } else {
      rc.fit.scale = *f.scale;
    }
  }
  if (f.gaussian) {
    rc.noise.kind = degrade::NoiseKind::gaussian;
    rc.noise.sigma = *f.gaussian;
    rc.noise_configured = true;
  }
  if (f.poisson) {
    rc.noise.kind = degrade::NoiseKind::poisson;
    rc.noise.lambda = *f.poisson;
    rc.noise_configured = true;
  }
  if (f.replace_frame) {
    rc.noise.kind = degrade::NoiseKind::frame_replace;
    rc.noise.frames = {*f.replace_frame};
    rc.noise_configured = true;
  }
  if (f.noise_seed) rc.noise.seed = *f.noise_seed;
}

// ---------------------------------------------------------------------------
// Artifact writing shared by the task commands.

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path);
}

void require_io(const RunConfig& rc) {
  if (rc.in_dir.empty()) throw ConfigError("--in is required");
  if (rc.out_dir.empty()) throw ConfigError("--out is required");
  std::error_code ec;
  fs::create_directories(rc.out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + rc.out_dir);
}

void write_fit_artifacts(const RunConfig& rc, const tasks::FitResult& fit,
                         const videoio::VideoSequence& output,
                         const videoio::VideoSequence& report_test,
                         const videoio::VideoSequence& report_ref) {
  videoio::save_frames(output, rc.out_dir);
  metrics::MetricsReport report = metrics::compare_videos(report_test, report_ref);
  report.curves = fit.curves();
  report.config_echo = echo_text(rc);
  report.runtime_seconds = fit.seconds_per_epoch * fit.epochs_run;
  metrics::save_json(report, rc.out_dir + "/metrics.json");
  metrics::save_curves_csv(report.curves, rc.out_dir + "/curves.csv");
  write_text_file(rc.out_dir + "/run-config.echo", echo_text(rc));
}

}  // namespace

// ---------------------------------------------------------------------------
// Config text.

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) {
        throw ConfigError("config line " + std::to_string(lineno) + ": malformed section header");
      }
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) {
        throw ConfigError("config line " + std::to_string(lineno) + ": empty section name");
      }
      continue;
    }
    const size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty() ||
        key.find_first_not_of(
            "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_") !=
            std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": malformed key");
    }
    const std::string value = trim(t.substr(eq + 1));
    out[section.empty() ? key : section + "." + key] = value;
  }
  return out;
}

std::map<std::string, std::string> load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

RunConfig resolve_run_config(const std::string& task, const FlagOverrides& flags) {
  const auto& tasks_list = known_tasks();
  if (std::find(tasks_list.begin(), tasks_list.end(), task) == tasks_list.end()) {
    throw ConfigError("unknown command '" + task + "'");
  }
  RunConfig rc;
  rc.task = task;

  std::map<std::string, std::string> kv;
  if (flags.config_path) kv = load_config_file(*flags.config_path);
  if (auto it = kv.find("task"); it != kv.end() && it->second != task) {
    throw ConfigError("config file describes task '" + it->second + "' but the command is '" +
                      task + "'");
  }

  if (task_has_fit(task)) {
    std::string preset = default_preset(task);
    if (auto it = kv.find("fit.preset"); it != kv.end()) preset = it->second;
    if (flags.preset) preset = *flags.preset;
    rc.fit = tasks::TaskConfig::preset(preset);
    rc.preset = preset;
    if (rc.fit.kind != kind_for_task(task)) {
      throw ConfigError("preset '" + preset + "' targets task '" +
                        tasks::kind_name(rc.fit.kind) + "', not '" + task + "'");
    }
  }
  if (task == "analyze") {
    rc.noise.kind = degrade::NoiseKind::frame_replace;
    rc.noise.frames.clear();  // empty means "middle frame", resolved at run time
    rc.noise_configured = true;
  }

  apply_config_map(rc, kv);
  apply_flags(rc, flags);
  return rc;
}

std::string echo_text(const RunConfig& rc) {
  std::ostringstream out;
  out << "# vdp run configuration (resolved)\n";
  out << "task = " << rc.task << "\n\n";

  out << "[io]\n";
  out << "in = " << rc.in_dir << "\n";
  if (rc.task == "remove") out << "mask = " << rc.mask_dir << "\n";
  if (rc.task == "metrics") out << "ref = " << rc.ref_dir << "\n";

  if (task_has_fit(rc.task)) {
    const tasks::TaskConfig& f = rc.fit;
    out << "\n[fit]\n";
    if (!rc.preset.empty()) out << "preset = " << rc.preset << "\n";
    out << "seed = " << f.seed << "\n";
    out << "epochs = " << f.epochs << "\n";
    out << "lr = " << fmt_double(f.lr) << "\n";
    out << "lambda_rec = " << fmt_double(f.weights.rec) << "\n";
    out << "lambda_spl = " << fmt_double(f.weights.spl) << "\n";
    out << "lambda_var = " << fmt_double(f.weights.var) << "\n";
    out << "ablate = " << tasks::ablation_name(f.ablate) << "\n";
    out << "early_stop = " << fmt_bool(f.early_stop) << "\n";
    out << "plateau_window = " << f.plateau_window << "\n";
    out << "plateau_tol = " << fmt_double(f.plateau_tol) << "\n";
    if (rc.task == "superres") out << "scale = " << f.scale << "\n";
    if (rc.task == "interpolate") out << "factor = " << rc.factor << "\n";
    out << "supervise_frame0 = " << fmt_bool(f.supervise_frame0) << "\n";
    out << "use_features = " << fmt_bool(f.use_features) << "\n";
    out << "feature_seed = " << f.feature_seed << "\n";
    out << "sr_kernel = " << kernel_name(f.sr_kernel) << "\n";
    out << "pyramid_factors = " << fmt_int_list(f.pyramid_factors) << "\n";
    out << "max_graph_bytes = " << f.max_graph_bytes << "\n";

    const model::ModelConfig& m = f.model;
    out << "\n[model]\n";
    out << "d = " << m.d << "\n";
    out << "hidden = " << m.hidden << "\n";
    out << "lstm_layers = " << m.lstm_layers << "\n";
    out << "c0 = " << m.c0 << "\n";
    out << "depth = " << m.depth << "\n";
    out << "min_conv_channels = " << m.min_conv_channels << "\n";
    out << "train_z0 = " << fmt_bool(m.train_z0) << "\n";
  }

  if (rc.task == "degrade" || rc.task == "analyze") {
    out << "\n[degrade]\n";
    out << "kind = " << degrade::kind_name(rc.noise.kind) << "\n";
    out << "sigma = " << fmt_double(rc.noise.sigma) << "\n";
    out << "lambda = " << fmt_double(rc.noise.lambda) << "\n";
    out << "frames = " << fmt_int_list(rc.noise.frames) << "\n";
    out << "scale = " << rc.noise.scale << "\n";
    out << "seed = " << rc.noise.seed << "\n";
  }

  if (rc.task == "analyze") {
    out << "\n[experiment]\n";
    out << "seeds = " << rc.exp_seeds << "\n";
    out << "tau = " << fmt_double(rc.tau) << "\n";
    out << "jobs = " << rc.jobs << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Commands.

int cmd_denoise(const RunConfig& rc) {
  require_io(rc);
  const videoio::VideoSequence input = videoio::load_frames(rc.in_dir);
  tasks::FitResult fit;
  const videoio::VideoSequence output = tasks::denoise(input, rc.fit, &fit);
  write_fit_artifacts(rc, fit, output, output, input);
  return kExitOk;
}

int cmd_interpolate(const RunConfig& rc) {
  require_io(rc);
  if (rc.factor < 1) throw ConfigError("--factor must be at least 1");
  const videoio::VideoSequence input = videoio::load_frames(rc.in_dir);
  tasks::FitResult fit;
  const videoio::VideoSequence output = tasks::interpolate(
      input, rc.fit, tasks::InterpolationRequest::for_factor(rc.factor), &fit);
  // The report compares the decoded endpoints (every factor-th output frame)
  // against the input they were fitted to.
  videoio::VideoSequence endpoints;
  for (int i = 0; i < input.t(); ++i) {
    endpoints.frames.push_back(output.frames[static_cast<size_t>(i) * rc.factor]);
  }
  write_fit_artifacts(rc, fit, output, endpoints, input);
  return kExitOk;
}

int cmd_superres(const RunConfig& rc) {
  require_io(rc);
  const videoio::VideoSequence input = videoio::load_frames(rc.in_dir);
  tasks::FitResult fit;
  const videoio::VideoSequence output = tasks::superresolve(input, rc.fit, rc.fit.scale, &fit);
  // Cycle fidelity: the downscaled output against the low-res input.
  const videoio::VideoSequence cycle =
      rc.fit.scale > 1 ? degrade::make_lowres(output, rc.fit.scale) : output;
  write_fit_artifacts(rc, fit, output, cycle, input);
  return kExitOk;
}

int cmd_remove(const RunConfig& rc) {
  require_io(rc);
  if (rc.mask_dir.empty()) throw ConfigError("--mask is required for remove");
  const videoio::VideoSequence input = videoio::load_frames(rc.in_dir);
  const videoio::MaskSequence masks = videoio::load_masks(rc.mask_dir, input.t());
  tasks::FitResult fit;
  const videoio::VideoSequence output = tasks::remove_object(input, rc.fit, masks, &fit);
  write_fit_artifacts(rc, fit, output, output, input);
  return kExitOk;
}

int cmd_degrade(const RunConfig& rc) {
  require_io(rc);
  if (!rc.noise_configured) {
    throw ConfigError("choose a degradation: --gaussian, --poisson, --replace-frame, or --scale");
  }
  const videoio::VideoSequence input = videoio::load_frames(rc.in_dir);
  rc.noise.validate(input.t());
  const videoio::VideoSequence output = degrade::apply(input, rc.noise);
  videoio::save_frames(output, rc.out_dir);
  write_text_file(rc.out_dir + "/run-config.echo", echo_text(rc));
  return kExitOk;
}

int cmd_analyze(const RunConfig& rc) {
  require_io(rc);
  const videoio::VideoSequence clean = videoio::load_frames(rc.in_dir);

  degrade::NoiseSpec spec = rc.noise;
  spec.kind = degrade::NoiseKind::frame_replace;
  if (spec.frames.empty()) spec.frames = {clean.t() / 2};
  spec.validate(clean.t());
  const videoio::VideoSequence corrupted = degrade::apply(clean, spec);

  metrics::ExperimentConfig ec;
  ec.base = rc.fit;
  ec.base.kind = tasks::TaskKind::denoise;
  if (rc.exp_seeds < 1) throw ConfigError("--seeds must be at least 1");
  ec.seeds.clear();
  for (int k = 1; k <= rc.exp_seeds; ++k) ec.seeds.push_back(static_cast<uint64_t>(k));
  ec.tau = rc.tau;
  ec.jobs = rc.jobs;
  const metrics::ExperimentResult res = metrics::convergence_experiment(corrupted, clean, ec);

  videoio::save_frames(corrupted, rc.out_dir + "/corrupted");

  // Headline curves: median MSE-to-input per setting, in setting order; the
  // clean-reference counterparts go to a sibling file.
  std::vector<std::pair<std::string, std::vector<double>>> input_curves, clean_curves;
  for (const metrics::SettingSummary& s : res.settings) {
    input_curves.emplace_back(s.setting.name, s.median_mse_to_input);
    clean_curves.emplace_back(s.setting.name, s.median_mse_to_clean);
  }
  metrics::save_curves_csv(input_curves, rc.out_dir + "/curves.csv");
  metrics::save_curves_csv(clean_curves, rc.out_dir + "/curves-clean.csv");

  const int mid = spec.frames.front();
  nlohmann::json j;
  j["schema"] = "vdp-analyze-v1";
  j["tau"] = res.tau;
  j["epochs"] = res.epochs;
  j["noise"] = spec.str();
  j["input_psnr_middle"] =
      metrics::psnr(corrupted.frames[static_cast<size_t>(mid)],
                    clean.frames[static_cast<size_t>(mid)]);
  j["settings"] = nlohmann::json::array();
  for (const metrics::SettingSummary& s : res.settings) {
    nlohmann::json js;
    js["name"] = s.setting.name;
    js["median_epochs_to_tau"] = s.median_epochs_to_tau;
    js["epochs_to_tau"] = nlohmann::json::array();
    js["plateau_epoch"] = nlohmann::json::array();
    js["snapshot_epoch"] = nlohmann::json::array();
    js["snapshot_psnr_middle"] = nlohmann::json::array();
    js["snapshot_nmi_mean"] = nlohmann::json::array();
    for (const metrics::SettingRun& run : s.runs) {
      js["epochs_to_tau"].push_back(run.epoch_to_tau ? nlohmann::json(*run.epoch_to_tau)
                                                     : nlohmann::json(nullptr));
      js["plateau_epoch"].push_back(run.plateau_epoch ? nlohmann::json(*run.plateau_epoch)
                                                      : nlohmann::json(nullptr));
      js["snapshot_epoch"].push_back(run.snapshot_epoch);
      js["snapshot_psnr_middle"].push_back(
          metrics::psnr(run.snapshot_frames[static_cast<size_t>(mid)],
                        clean.frames[static_cast<size_t>(mid)]));
      // Mean off-diagonal NMI of the snapshot against the clean frames: how
      // mutually informative the recovered sequence is with the original.
      double nmi_acc = 0.0;
      for (int a = 0; a < clean.t(); ++a) {
        nmi_acc += metrics::nmi(run.snapshot_frames[static_cast<size_t>(a)],
                                clean.frames[static_cast<size_t>(a)]);
      }
      js["snapshot_nmi_mean"].push_back(nmi_acc / clean.t());

      const std::string run_dir = rc.out_dir + "/snapshots/" + s.setting.name + "/seed" +
                                  std::to_string(run.seed);
      videoio::VideoSequence snap;
      snap.frames = run.snapshot_frames;
      videoio::save_frames(snap, run_dir);
    }
    j["settings"].push_back(std::move(js));

    // NMI table: first seed's snapshot frames (rows) against the clean
    // frames (columns).
    std::ostringstream table;
    table << "frame";
    for (int b = 0; b < clean.t(); ++b) table << ",clean" << b;
    table << "\n";
    const metrics::SettingRun& first = s.runs.front();
    for (int a = 0; a < clean.t(); ++a) {
      table << a;
      for (int b = 0; b < clean.t(); ++b) {
        table << ','
              << fmt_double(metrics::nmi(first.snapshot_frames[static_cast<size_t>(a)],
                                         clean.frames[static_cast<size_t>(b)]));
      }
      table << "\n";
    }
    write_text_file(rc.out_dir + "/nmi-" + s.setting.name + ".csv", table.str());
  }
  j["config"] = echo_text(rc);

  std::ofstream out(rc.out_dir + "/metrics.json", std::ios::binary);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("cannot write " + rc.out_dir + "/metrics.json");
  write_text_file(rc.out_dir + "/run-config.echo", echo_text(rc));
  return kExitOk;
}

int cmd_metrics(const RunConfig& rc) {
  require_io(rc);
  if (rc.ref_dir.empty()) throw ConfigError("--ref is required for metrics");
  const videoio::VideoSequence test = videoio::load_frames(rc.in_dir);
  const videoio::VideoSequence ref = videoio::load_frames(rc.ref_dir);
  metrics::MetricsReport report = metrics::compare_videos(test, ref);
  report.config_echo = echo_text(rc);
  metrics::save_json(report, rc.out_dir + "/metrics.json");
  write_text_file(rc.out_dir + "/run-config.echo", echo_text(rc));
  return kExitOk;
}

int run_command(const RunConfig& rc) {
  if (rc.task == "denoise") return cmd_denoise(rc);
  if (rc.task == "interpolate") return cmd_interpolate(rc);
  if (rc.task == "superres") return cmd_superres(rc);
  if (rc.task == "remove") return cmd_remove(rc);
  if (rc.task == "degrade") return cmd_degrade(rc);
  if (rc.task == "analyze") return cmd_analyze(rc);
  if (rc.task == "metrics") return cmd_metrics(rc);
  throw ConfigError("unknown command '" + rc.task + "'");
}

}  // namespace vdp::cli
