// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0

#include "vdp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "vdp/errors.hpp"

namespace vdp::metrics {

namespace {

double mse_between(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  double acc = 0.0;
  int64_t n = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const Tensor& x = a[i];
    const Tensor& y = b[i];
    for (int64_t j = 0; j < x.numel(); ++j) {
      const double d = static_cast<double>(x[j]) - static_cast<double>(y[j]);
      acc += d * d;
    }
    n += x.numel();
  }
  return acc / static_cast<double>(n);
}

SettingRun run_one(const videoio::VideoSequence& corrupted, const videoio::VideoSequence& clean,
                   const ExperimentConfig& cfg, const ExperimentSetting& setting, uint64_t seed) {
  const videoio::VideoSequence& input = setting.use_clean ? clean : corrupted;

  tasks::TaskConfig tc = cfg.base;
  tc.kind = tasks::TaskKind::denoise;
  tc.seed = seed;
  tc.ablate = setting.ablate;
  tc.early_stop = false;  // the study observes the full curve, dip included

  SettingRun run;
  run.seed = seed;

  std::vector<double> totals;
  std::vector<Tensor> last_frames;
  const auto observer = [&](const tasks::EpochInfo& e) {
    const double to_input = mse_between(e.frames, input.frames);
    const double to_clean = mse_between(e.frames, clean.frames);
    run.mse_to_input.push_back(to_input);
    run.mse_to_clean.push_back(to_clean);
    if (!run.epoch_to_tau && to_input < cfg.tau) run.epoch_to_tau = e.epoch;
    totals.push_back(e.total);
    // detect_plateau returns the first qualifying epoch, so checking the
    // growing curve every epoch catches it the moment it happens and the
    // snapshot is simply the current decode.
    if (!run.plateau_epoch && totals.size() > static_cast<size_t>(tc.plateau_window)) {
      if (auto p = tasks::detect_plateau(totals, tc.plateau_window, tc.plateau_tol)) {
        run.plateau_epoch = p;
        run.snapshot_epoch = e.epoch;
        run.snapshot_frames = e.frames;
      }
    }
    last_frames = e.frames;
  };

  const tasks::FitResult fit = tasks::fit(input, tc, nullptr, observer);
  run.total_curve = fit.total_curve;
  if (!run.plateau_epoch) {
    run.snapshot_epoch = fit.epochs_run - 1;
    run.snapshot_frames = std::move(last_frames);
  }
  return run;
}

std::vector<double> median_curve(const std::vector<SettingRun>& runs,
                                 const std::vector<double> SettingRun::* curve) {
  const size_t epochs = (runs.front().*curve).size();
  std::vector<double> out(epochs);
  std::vector<double> column(runs.size());
  for (size_t e = 0; e < epochs; ++e) {
    for (size_t r = 0; r < runs.size(); ++r) column[r] = (runs[r].*curve)[e];
    out[e] = median(column);
  }
  return out;
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) throw ConfigError("median of an empty sample is undefined");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<ExperimentSetting> ExperimentConfig::standard_settings() {
  return {
      {"clean+L1", true, tasks::Ablation::rec_only},
      {"corrupt+L1", false, tasks::Ablation::rec_only},
      {"corrupt+L1+spl", false, tasks::Ablation::rec_spl},
      {"corrupt+L1+var", false, tasks::Ablation::rec_var},
      {"corrupt+all", false, tasks::Ablation::all},
  };
}

void ExperimentConfig::validate() const {
  base.validate();
  if (base.kind != tasks::TaskKind::denoise) {
    throw ConfigError("experiment base config must use the denoise task");
  }
  if (seeds.empty()) throw ConfigError("experiment needs at least one seed");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (settings.empty()) throw ConfigError("experiment needs at least one setting");
  for (const ExperimentSetting& s : settings) {
    if (s.name.empty()) throw ConfigError("every setting needs a name");
  }
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
}

std::vector<std::pair<std::string, std::vector<double>>> ExperimentResult::csv_curves() const {
  std::vector<std::pair<std::string, std::vector<double>>> out;
  out.reserve(settings.size() * 2);
  for (const SettingSummary& s : settings) {
    out.emplace_back(s.setting.name + "/input", s.median_mse_to_input);
    out.emplace_back(s.setting.name + "/clean", s.median_mse_to_clean);
  }
  return out;
}

ExperimentResult convergence_experiment(const videoio::VideoSequence& corrupted,
                                        const videoio::VideoSequence& clean,
                                        const ExperimentConfig& cfg) {
  corrupted.validate();
  clean.validate();
  cfg.validate();
  if (corrupted.t() != clean.t() || corrupted.frame_shape() != clean.frame_shape()) {
    throw ShapeError("corrupted and clean videos must share frame count and shape");
  }
  if (cfg.snapshot_frame >= corrupted.t()) {
    throw ConfigError("snapshot_frame is out of range for this video");
  }

  const size_t n_settings = cfg.settings.size();
  const size_t n_seeds = cfg.seeds.size();
  std::vector<std::vector<SettingRun>> grid(n_settings, std::vector<SettingRun>(n_seeds));

  // Every (setting, seed) fit is independent: it owns its tape, model, and
  // RNG stream, and writes only its own slot, so scheduling order cannot
  // change any result.
  std::atomic<size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  const auto worker = [&] {
    for (;;) {
      const size_t k = next.fetch_add(1);
      if (k >= n_settings * n_seeds) return;
      {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (first_error) return;
      }
      try {
        const size_t si = k / n_seeds;
        const size_t ki = k % n_seeds;
        grid[si][ki] = run_one(corrupted, clean, cfg, cfg.settings[si], cfg.seeds[ki]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };

  const int jobs = std::min<int>(cfg.jobs, static_cast<int>(n_settings * n_seeds));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(jobs));
    for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  ExperimentResult result;
  result.epochs = cfg.base.epochs;
  result.tau = cfg.tau;
  result.settings.reserve(n_settings);
  for (size_t si = 0; si < n_settings; ++si) {
    SettingSummary summary;
    summary.setting = cfg.settings[si];
    summary.runs = std::move(grid[si]);
    std::vector<double> to_tau(n_seeds);
    for (size_t ki = 0; ki < n_seeds; ++ki) {
      // Right-censor runs that never fitted their input within the budget.
      to_tau[ki] = static_cast<double>(
          summary.runs[ki].epoch_to_tau.value_or(cfg.base.epochs));
    }
    summary.median_epochs_to_tau = median(to_tau);
    summary.median_mse_to_input = median_curve(summary.runs, &SettingRun::mse_to_input);
    summary.median_mse_to_clean = median_curve(summary.runs, &SettingRun::mse_to_clean);
    result.settings.push_back(std::move(summary));
  }
  return result;
}

}  // namespace vdp::metrics
