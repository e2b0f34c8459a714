// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0
#include "vdp/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "vdp/errors.hpp"

namespace vdp::metrics {
namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
  }
}

void require_frame(const Tensor& t, const char* op) {
  if (t.shape().ndim() != 3) {
    throw ShapeError(std::string(op) + ": expected a [C,H,W] frame, got " + t.shape().str());
  }
}

// Channel-averaged grayscale plane in double precision.
std::vector<double> to_gray(const Tensor& t) {
  const int c = t.shape()[0], h = t.shape()[1], w = t.shape()[2];
  std::vector<double> g(static_cast<size_t>(h) * static_cast<size_t>(w), 0.0);
  const float* p = t.data();
  const double inv_c = 1.0 / static_cast<double>(c);
  for (int ci = 0; ci < c; ++ci) {
    for (size_t i = 0; i < g.size(); ++i) {
      g[i] += static_cast<double>(p[static_cast<size_t>(ci) * g.size() + i]) * inv_c;
    }
  }
  return g;
}

constexpr int kSsimWindow = 11;
constexpr int kSsimRadius = kSsimWindow / 2;

// Normalized 1D Gaussian taps; the separable product reproduces the
// normalized 2D window.
std::array<double, kSsimWindow> ssim_kernel() {
  std::array<double, kSsimWindow> k{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimRadius;
    k[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    sum += k[static_cast<size_t>(i)];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Valid-window separable filter: wide pass over rows, then tall pass over
// columns. Input is h*w, output is (h-2R)*(w-2R).
std::vector<double> filter_valid(const std::vector<double>& in, int h, int w,
                                 const std::array<double, kSsimWindow>& k) {
  const int wv = w - 2 * kSsimRadius;
  const int hv = h - 2 * kSsimRadius;
  std::vector<double> horiz(static_cast<size_t>(h) * static_cast<size_t>(wv), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < wv; ++x) {
      double acc = 0.0;
      for (int dx = 0; dx < kSsimWindow; ++dx) {
        acc += k[static_cast<size_t>(dx)] * in[static_cast<size_t>(y) * w + (x + dx)];
      }
      horiz[static_cast<size_t>(y) * wv + x] = acc;
    }
  }
  std::vector<double> out(static_cast<size_t>(hv) * static_cast<size_t>(wv), 0.0);
  for (int y = 0; y < hv; ++y) {
    for (int x = 0; x < wv; ++x) {
      double acc = 0.0;
      for (int dy = 0; dy < kSsimWindow; ++dy) {
        acc += k[static_cast<size_t>(dy)] * horiz[static_cast<size_t>(y + dy) * wv + x];
      }
      out[static_cast<size_t>(y) * wv + x] = acc;
    }
  }
  return out;
}

int histogram_bin(float v, int bins) {
  const int i = static_cast<int>(v * static_cast<float>(bins));
  return std::clamp(i, 0, bins - 1);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b, double peak) {
  require_same_shape(a, b, "psnr");
  if (peak <= 0.0) throw ConfigError("psnr: peak must be positive");
  const float* pa = a.data();
  const float* pb = b.data();
  double acc = 0.0;
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(n);
  if (mse == 0.0) return 99.0;
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Tensor& a, const Tensor& b, double peak) {
  require_frame(a, "ssim");
  require_same_shape(a, b, "ssim");
  if (peak <= 0.0) throw ConfigError("ssim: peak must be positive");
  const int h = a.shape()[1], w = a.shape()[2];
  if (h < kSsimWindow || w < kSsimWindow) {
    throw ShapeError("ssim: frame " + a.shape().str() + " is smaller than the 11x11 window");
  }
  const std::vector<double> ga = to_gray(a);
  const std::vector<double> gb = to_gray(b);
  std::vector<double> gaa(ga.size()), gbb(ga.size()), gab(ga.size());
  for (size_t i = 0; i < ga.size(); ++i) {
    gaa[i] = ga[i] * ga[i];
    gbb[i] = gb[i] * gb[i];
    gab[i] = ga[i] * gb[i];
  }
  const auto k = ssim_kernel();
  const std::vector<double> mu_a = filter_valid(ga, h, w, k);
  const std::vector<double> mu_b = filter_valid(gb, h, w, k);
  const std::vector<double> s_aa = filter_valid(gaa, h, w, k);
  const std::vector<double> s_bb = filter_valid(gbb, h, w, k);
  const std::vector<double> s_ab = filter_valid(gab, h, w, k);
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  double total = 0.0;
  for (size_t i = 0; i < mu_a.size(); ++i) {
    const double va = s_aa[i] - mu_a[i] * mu_a[i];
    const double vb = s_bb[i] - mu_b[i] * mu_b[i];
    const double cov = s_ab[i] - mu_a[i] * mu_b[i];
    total += ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

double nmi(const Tensor& a, const Tensor& b, int bins) {
  require_same_shape(a, b, "nmi");
  if (bins < 2) throw ConfigError("nmi: need at least 2 bins");
  const int64_t n = a.numel();
  std::vector<double> joint(static_cast<size_t>(bins) * static_cast<size_t>(bins), 0.0);
  const float* pa = a.data();
  const float* pb = b.data();
  for (int64_t i = 0; i < n; ++i) {
    const int ia = histogram_bin(pa[i], bins);
    const int ib = histogram_bin(pb[i], bins);
    joint[static_cast<size_t>(ia) * static_cast<size_t>(bins) + static_cast<size_t>(ib)] += 1.0;
  }
  for (auto& v : joint) v /= static_cast<double>(n);
  std::vector<double> pa_m(static_cast<size_t>(bins), 0.0), pb_m(static_cast<size_t>(bins), 0.0);
  for (int i = 0; i < bins; ++i) {
    for (int j = 0; j < bins; ++j) {
      const double p = joint[static_cast<size_t>(i) * static_cast<size_t>(bins) + j];
      pa_m[static_cast<size_t>(i)] += p;
      pb_m[static_cast<size_t>(j)] += p;
    }
  }
  double ha = 0.0, hb = 0.0, mi = 0.0;
  for (int i = 0; i < bins; ++i) {
    if (pa_m[static_cast<size_t>(i)] > 0.0) {
      ha -= pa_m[static_cast<size_t>(i)] * std::log(pa_m[static_cast<size_t>(i)]);
    }
    if (pb_m[static_cast<size_t>(i)] > 0.0) {
      hb -= pb_m[static_cast<size_t>(i)] * std::log(pb_m[static_cast<size_t>(i)]);
    }
  }
  for (int i = 0; i < bins; ++i) {
    for (int j = 0; j < bins; ++j) {
      const double p = joint[static_cast<size_t>(i) * static_cast<size_t>(bins) + j];
      if (p > 0.0) {
        mi += p * std::log(p / (pa_m[static_cast<size_t>(i)] * pb_m[static_cast<size_t>(j)]));
      }
    }
  }
  if (ha + hb == 0.0) return 1.0;
  return 2.0 * mi / (ha + hb);
}

MetricsReport compare_videos(const videoio::VideoSequence& test,
                             const videoio::VideoSequence& reference) {
  if (test.t() != reference.t()) {
    throw ShapeError("compare_videos: frame count mismatch, test has " +
                     std::to_string(test.t()) + ", reference has " +
                     std::to_string(reference.t()));
  }
  MetricsReport r;
  const int t = test.t();
  // SSIM is undefined below its 11x11 window; such reports simply omit it
  // (empty frame list, zero mean) rather than failing the whole comparison.
  const Shape& fs = test.frame_shape();
  const bool ssim_defined = fs[1] >= kSsimWindow && fs[2] >= kSsimWindow;
  r.psnr_frames.reserve(static_cast<size_t>(t));
  if (ssim_defined) r.ssim_frames.reserve(static_cast<size_t>(t));
  for (int i = 0; i < t; ++i) {
    r.psnr_frames.push_back(psnr(test.frames[static_cast<size_t>(i)],
                                 reference.frames[static_cast<size_t>(i)]));
    if (ssim_defined) {
      r.ssim_frames.push_back(ssim(test.frames[static_cast<size_t>(i)],
                                   reference.frames[static_cast<size_t>(i)]));
    }
  }
  r.psnr_mean = 0.0;
  r.ssim_mean = 0.0;
  for (int i = 0; i < t; ++i) {
    r.psnr_mean += r.psnr_frames[static_cast<size_t>(i)] / static_cast<double>(t);
    if (ssim_defined) {
      r.ssim_mean += r.ssim_frames[static_cast<size_t>(i)] / static_cast<double>(t);
    }
  }
  r.nmi_matrix.assign(static_cast<size_t>(t), std::vector<double>(static_cast<size_t>(t), 0.0));
  for (int i = 0; i < t; ++i) {
    for (int j = 0; j < t; ++j) {
      r.nmi_matrix[static_cast<size_t>(i)][static_cast<size_t>(j)] =
          nmi(test.frames[static_cast<size_t>(i)], reference.frames[static_cast<size_t>(j)]);
    }
  }
  return r;
}

void save_json(const MetricsReport& report, const std::filesystem::path& path,
               bool include_runtime) {
  nlohmann::json j;
  j["schema"] = report.schema;
  j["psnr"]["frames"] = report.psnr_frames;
  j["psnr"]["mean"] = report.psnr_mean;
  // An absent ssim block means the frames were smaller than the SSIM window.
  if (!report.ssim_frames.empty()) {
    j["ssim"]["frames"] = report.ssim_frames;
    j["ssim"]["mean"] = report.ssim_mean;
  }
  j["nmi"]["matrix"] = report.nmi_matrix;
  nlohmann::json curves = nlohmann::json::object();
  for (const auto& [name, values] : report.curves) curves[name] = values;
  j["curves"] = curves;
  j["config"] = report.config_echo;
  if (include_runtime) j["runtime_seconds"] = report.runtime_seconds;
  std::ofstream out(path);
  if (!out) throw IoError("save_json: cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("save_json: write to " + path.string() + " failed");
}

MetricsReport load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_json: cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("load_json: " + path.string() + " is not valid JSON: " + e.what());
  }
  MetricsReport r;
  try {
    r.schema = j.at("schema").get<std::string>();
    if (r.schema != MetricsReport::kSchema) {
      throw IoError("load_json: unsupported schema '" + r.schema + "' in " + path.string());
    }
    r.psnr_frames = j.at("psnr").at("frames").get<std::vector<double>>();
    r.psnr_mean = j.at("psnr").at("mean").get<double>();
    if (j.contains("ssim")) {
      r.ssim_frames = j.at("ssim").at("frames").get<std::vector<double>>();
      r.ssim_mean = j.at("ssim").at("mean").get<double>();
    }
    r.nmi_matrix = j.at("nmi").at("matrix").get<std::vector<std::vector<double>>>();
    for (const auto& [name, values] : j.at("curves").items()) {
      r.curves.emplace_back(name, values.get<std::vector<double>>());
    }
    r.config_echo = j.at("config").get<std::string>();
    if (j.contains("runtime_seconds")) r.runtime_seconds = j["runtime_seconds"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("load_json: " + path.string() + " does not match the report schema: " +
                  e.what());
  }
  return r;
}

void save_curves_csv(const std::vector<std::pair<std::string, std::vector<double>>>& curves,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_curves_csv: cannot open " + path.string() + " for writing");
  out << "epoch";
  size_t rows = 0;
  for (const auto& [name, values] : curves) {
    if (name.find_first_of(",\"\n") != std::string::npos) {
      throw ConfigError("save_curves_csv: curve name '" + name +
                        "' contains a CSV delimiter");
    }
    out << ',' << name;
    rows = std::max(rows, values.size());
  }
  out << '\n';
  for (size_t i = 0; i < rows; ++i) {
    out << i;
    for (const auto& [name, values] : curves) {
      out << ',';
      if (i < values.size()) out << format_double(values[i]);
    }
    out << '\n';
  }
  if (!out) throw IoError("save_curves_csv: write to " + path.string() + " failed");
}

}  // namespace vdp::metrics
