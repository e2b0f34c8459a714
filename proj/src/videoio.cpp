// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0

#include "vdp/videoio.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>

#include "vdp/errors.hpp"

namespace vdp::videoio {

namespace {

namespace fs = std::filesystem;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Reads one 8-bit PNG; returns interleaved rows. Throws IoError with the
// path on malformed input or on a color type other than `want_color`.
std::vector<unsigned char> read_png(const std::string& path, int want_color, int channels,
                                    int* out_w, int* out_h) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open: " + path);
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw IoError("not a PNG file: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng allocation failed reading " + path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng allocation failed reading " + path);
  }

  std::vector<unsigned char> data;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng failed to decode " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (depth != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path + ": expected 8-bit PNG, got " + std::to_string(depth) + "-bit");
  }
  if (color != want_color) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path + ": expected " +
                  (want_color == PNG_COLOR_TYPE_RGB ? std::string("RGB") : std::string("grayscale")) +
                  " color type, got PNG color type " + std::to_string(color));
  }

  data.resize(static_cast<size_t>(w) * h * static_cast<size_t>(channels));
  rows.resize(static_cast<size_t>(h));
  for (int y = 0; y < h; ++y)
    rows[static_cast<size_t>(y)] = data.data() + static_cast<size_t>(y) * w * channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  *out_w = w;
  *out_h = h;
  return data;
}

void write_png(const std::string& path, int w, int h, int color, int channels,
               const std::vector<unsigned char>& data) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng allocation failed writing " + path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng allocation failed writing " + path);
  }
  std::vector<png_bytep> rows(static_cast<size_t>(h));
  for (int y = 0; y < h; ++y)
    rows[static_cast<size_t>(y)] =
        const_cast<png_bytep>(data.data() + static_cast<size_t>(y) * w * channels);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng failed to encode " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, color,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::string frame_name(int idx) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%05d.png", idx);
  return buf;
}

std::string mask_name(int idx) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "mask_%05d.png", idx);
  return buf;
}

// Collects files matching stem_%05d.png and verifies contiguity from 0.
std::vector<fs::path> indexed_files(const std::string& dir, const std::string& stem,
                                    const char* what) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::map<int, fs::path> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() != stem.size() + 10 || name.rfind(stem + "_", 0) != 0 ||
        name.substr(name.size() - 4) != ".png")
      continue;
    const std::string digits = name.substr(stem.size() + 1, 5);
    if (digits.find_first_not_of("0123456789") != std::string::npos) continue;
    found.emplace(std::stoi(digits), entry.path());
  }
  if (found.empty()) throw IoError(std::string("no ") + what + " files (" + stem +
                                   "_%05d.png) found in " + dir);
  std::vector<fs::path> out;
  int expect = 0;
  for (const auto& [idx, path] : found) {
    if (idx != expect)
      throw IoError(std::string("gap in ") + what + " indices in " + dir + ": expected " +
                    stem + "_" + std::to_string(expect) + ", found index " +
                    std::to_string(idx));
    ++expect;
    out.push_back(path);
  }
  return out;
}

Tensor gray_to_mask(const std::vector<unsigned char>& px, int w, int h) {
  Tensor m(Shape{1, h, w});
  for (int64_t i = 0; i < static_cast<int64_t>(px.size()); ++i)
    m[i] = px[static_cast<size_t>(i)] >= 128 ? 1.0f : 0.0f;
  return m;
}

}  // namespace

const Shape& VideoSequence::frame_shape() const {
  if (frames.empty()) throw ConfigError("video sequence is empty");
  return frames.front().shape();
}

void VideoSequence::validate() const {
  if (frames.empty()) throw ConfigError("video sequence must contain at least one frame");
  const Shape& s = frames.front().shape();
  if (s.ndim() != 3) throw ShapeError("frames must be [C,H,W], got " + s.str());
  for (size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].shape() != s)
      throw ShapeError("frame " + std::to_string(i) + " has shape " + frames[i].shape().str() +
                       ", expected " + s.str());
    for (int64_t k = 0; k < frames[i].numel(); ++k)
      if (!(frames[i][k] >= 0.0f && frames[i][k] <= 1.0f))
        throw ConfigError("frame " + std::to_string(i) + " has value " +
                          std::to_string(frames[i][k]) + " outside [0,1]");
  }
}

void MaskSequence::validate_against(const VideoSequence& v) const {
  if (static_cast<int>(masks.size()) != v.t())
    throw ShapeError("mask count " + std::to_string(masks.size()) + " does not match " +
                     std::to_string(v.t()) + " frames");
  const Shape& fsh = v.frame_shape();
  for (size_t i = 0; i < masks.size(); ++i) {
    const Shape& ms = masks[i].shape();
    if (ms != Shape{1, fsh[1], fsh[2]})
      throw ShapeError("mask " + std::to_string(i) + " has shape " + ms.str() +
                       ", expected [1," + std::to_string(fsh[1]) + "," +
                       std::to_string(fsh[2]) + "]");
  }
}

Tensor load_frame_png(const std::string& path) {
  int w = 0, h = 0;
  const auto px = read_png(path, PNG_COLOR_TYPE_RGB, 3, &w, &h);
  Tensor f(Shape{3, h, w});
  const int64_t plane = static_cast<int64_t>(h) * w;
  for (int64_t i = 0; i < plane; ++i)
    for (int c = 0; c < 3; ++c)
      f[c * plane + i] = static_cast<float>(px[static_cast<size_t>(i * 3 + c)]) / 255.0f;
  return f;
}

void save_frame_png(const std::string& path, const Tensor& frame) {
  const Shape& s = frame.shape();
  if (s.ndim() != 3 || s[0] != 3)
    throw ShapeError("save_frame_png: expected [3,H,W], got " + s.str());
  const int h = s[1], w = s[2];
  const int64_t plane = static_cast<int64_t>(h) * w;
  std::vector<unsigned char> px(static_cast<size_t>(plane) * 3);
  for (int64_t i = 0; i < plane; ++i)
    for (int c = 0; c < 3; ++c) {
      const float v = frame[c * plane + i];
      if (!(v >= 0.0f && v <= 1.0f))
        throw ConfigError("save_frame_png: value " + std::to_string(v) +
                          " outside [0,1]; clip before saving");
      px[static_cast<size_t>(i * 3 + c)] =
          static_cast<unsigned char>(std::floor(v * 255.0f + 0.5f));
    }
  write_png(path, w, h, PNG_COLOR_TYPE_RGB, 3, px);
}

void save_gray_png(const std::string& path, int w, int h,
                   const std::vector<unsigned char>& pixels) {
  if (static_cast<int64_t>(pixels.size()) != static_cast<int64_t>(w) * h)
    throw ShapeError("save_gray_png: pixel count " + std::to_string(pixels.size()) +
                     " does not match " + std::to_string(w) + "x" + std::to_string(h));
  write_png(path, w, h, PNG_COLOR_TYPE_GRAY, 1, pixels);
}

VideoSequence load_frames(const std::string& dir) {
  VideoSequence v;
  for (const fs::path& p : indexed_files(dir, "frame", "frame")) {
    v.frames.push_back(load_frame_png(p.string()));
    v.filenames.push_back(p.filename().string());
    if (v.frames.size() > 1 && v.frames.back().shape() != v.frames.front().shape())
      throw IoError("mixed frame dimensions in " + dir + ": " + v.filenames.front() + " is " +
                    v.frames.front().shape().str() + " but " + v.filenames.back() + " is " +
                    v.frames.back().shape().str());
  }
  return v;
}

void save_frames(const VideoSequence& v, const std::string& dir) {
  if (v.frames.empty()) throw ConfigError("save_frames: empty sequence");
  std::error_code ec;
  fs::create_directories(dir, ec);
  for (int i = 0; i < v.t(); ++i)
    save_frame_png((fs::path(dir) / frame_name(i)).string(), v.frames[static_cast<size_t>(i)]);
}

MaskSequence load_masks(const std::string& dir, int t) {
  if (t < 1) throw ConfigError("load_masks: frame count must be >= 1");
  MaskSequence ms;
  const fs::path single = fs::path(dir) / "mask.png";
  if (fs::exists(single)) {
    int w = 0, h = 0;
    const auto px = read_png(single.string(), PNG_COLOR_TYPE_GRAY, 1, &w, &h);
    const Tensor m = gray_to_mask(px, w, h);
    ms.masks.assign(static_cast<size_t>(t), m);
    ms.stationary = true;
    return ms;
  }
  std::vector<fs::path> files;
  try {
    files = indexed_files(dir, "mask", "mask");
  } catch (const IoError& e) {
    throw IoError(std::string(e.what()) + " (and no stationary mask.png present)");
  }
  if (static_cast<int>(files.size()) != t)
    throw IoError("found " + std::to_string(files.size()) + " mask files in " + dir +
                  " for " + std::to_string(t) + " frames; provide exactly one mask.png or " +
                  std::to_string(t) + " mask_%05d.png files");
  for (const fs::path& p : files) {
    int w = 0, h = 0;
    const auto px = read_png(p.string(), PNG_COLOR_TYPE_GRAY, 1, &w, &h);
    ms.masks.push_back(gray_to_mask(px, w, h));
  }
  return ms;
}

}  // namespace vdp::videoio
