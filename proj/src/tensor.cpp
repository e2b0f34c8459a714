// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0

#include "vdp/tensor.hpp"

#include <cmath>
#include <sstream>

namespace vdp {

Shape::Shape(std::initializer_list<int> dims) {
  if (dims.size() > 4) throw ShapeError("Shape: at most 4 axes supported, got " + std::to_string(dims.size()));
  for (int d : dims) {
    if (d <= 0) throw ShapeError("Shape: axis " + std::to_string(ndim_) + " has non-positive extent " + std::to_string(d));
    dims_[static_cast<size_t>(ndim_++)] = d;
  }
}

Shape::Shape(const std::vector<int>& dims) {
  if (dims.size() > 4) throw ShapeError("Shape: at most 4 axes supported, got " + std::to_string(dims.size()));
  for (int d : dims) {
    if (d <= 0) throw ShapeError("Shape: axis " + std::to_string(ndim_) + " has non-positive extent " + std::to_string(d));
    dims_[static_cast<size_t>(ndim_++)] = d;
  }
}

int64_t Shape::numel() const {
  int64_t n = 1;
  for (int i = 0; i < ndim_; ++i) n *= dims_[static_cast<size_t>(i)];
  return ndim_ == 0 ? 0 : n;
}

bool Shape::operator==(const Shape& other) const {
  if (ndim_ != other.ndim_) return false;
  for (int i = 0; i < ndim_; ++i)
    if (dims_[static_cast<size_t>(i)] != other.dims_[static_cast<size_t>(i)]) return false;
  return true;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << "[";
  for (int i = 0; i < ndim_; ++i) {
    if (i) os << ",";
    os << dims_[static_cast<size_t>(i)];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape shape, float fill)
    : shape_(shape), data_(static_cast<size_t>(shape.numel()), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
  if (static_cast<int64_t>(data_.size()) != shape_.numel())
    throw ShapeError("Tensor: data length " + std::to_string(data_.size()) + " does not match shape " + shape_.str());
}

float& Tensor::at(int c, int y, int x) {
  const int H = shape_[1], W = shape_[2];
  return data_[static_cast<size_t>((static_cast<int64_t>(c) * H + y) * W + x)];
}

float Tensor::at(int c, int y, int x) const {
  const int H = shape_[1], W = shape_[2];
  return data_[static_cast<size_t>((static_cast<int64_t>(c) * H + y) * W + x)];
}

float& Tensor::at(int t, int c, int y, int x) {
  const int C = shape_[1], H = shape_[2], W = shape_[3];
  return data_[static_cast<size_t>(((static_cast<int64_t>(t) * C + c) * H + y) * W + x)];
}

float Tensor::at(int t, int c, int y, int x) const {
  const int C = shape_[1], H = shape_[2], W = shape_[3];
  return data_[static_cast<size_t>(((static_cast<int64_t>(t) * C + c) * H + y) * W + x)];
}

bool Tensor::all_finite() const {
  for (float v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

float Tensor::scalar_value() const {
  if (numel() != 1) throw ShapeError("scalar_value: tensor has shape " + shape_.str() + ", expected one element");
  return data_[0];
}

Tensor Tensor::reshaped(Shape new_shape) const {
  if (new_shape.numel() != numel())
    throw ShapeError("reshape: element count mismatch, " + shape_.str() + " -> " + new_shape.str());
  Tensor out = *this;
  out.shape_ = new_shape;
  return out;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
}

}  // namespace vdp
