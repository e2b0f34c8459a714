// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "vdp/errors.hpp"

namespace vdp {

// Extent list for up to 4 axes. Axis meaning is positional and owned by the
// caller: [D] vectors, [C,H,W] frames, [T,C,H,W] frame stacks.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<int> dims);
  explicit Shape(const std::vector<int>& dims);

  int ndim() const { return ndim_; }
  int operator[](int axis) const { return dims_[static_cast<size_t>(axis)]; }
  int64_t numel() const;
  bool operator==(const Shape& other) const;
  bool operator!=(const Shape& other) const { return !(*this == other); }
  std::string str() const;

 private:
  std::array<int, 4> dims_{1, 1, 1, 1};
  int ndim_ = 0;
};

// Dense row-major float32 tensor. Reductions elsewhere accumulate in double.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor zeros(Shape shape) { return Tensor(shape, 0.0f); }
  static Tensor full(Shape shape, float v) { return Tensor(shape, v); }
  static Tensor scalar(float v) { return Tensor(Shape{1}, std::vector<float>{v}); }

  const Shape& shape() const { return shape_; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::vector<float>& vec() { return data_; }
  const std::vector<float>& vec() const { return data_; }

  float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // Indexed access for the common 3D/4D layouts.
  float& at(int c, int y, int x);
  float at(int c, int y, int x) const;
  float& at(int t, int c, int y, int x);
  float at(int t, int c, int y, int x) const;

  bool all_finite() const;
  float scalar_value() const;  // requires numel() == 1

  // Reshape with identical element count; data is shared by copy semantics.
  Tensor reshaped(Shape new_shape) const;

 private:
  Shape shape_;
  std::vector<float> data_;
};

// Throws ShapeError naming `what` when the shapes differ.
void check_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace vdp
