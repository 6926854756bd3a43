// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "uniecs/error.hpp"

namespace uniecs {

/// Extents of a tensor. Only rank 1 and rank 2 are used; a rank-1 tensor of
/// extent n is viewed as a 1 x n row by row-oriented operations.
using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

/// Dense row-major tensor with value semantics.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  /// Zero-filled tensor of the given shape.
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(element_count(shape_), T{0}) {}

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != element_count(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + to_string(shape_));
    }
  }

  static Tensor matrix(std::size_t rows, std::size_t cols) { return Tensor(Shape{rows, cols}); }
  static Tensor vector(std::size_t n) { return Tensor(Shape{n}); }
  static Tensor scalar(T value) { return Tensor(Shape{1}, std::vector<T>{value}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  /// Number of rows under the row-major matrix view.
  std::size_t rows() const noexcept { return shape_.size() >= 2 ? shape_[0] : (shape_.empty() ? 0 : 1); }
  /// Length of one row under the matrix view.
  std::size_t cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<T> row(std::size_t r) { return std::span<T>(data_).subspan(r * cols(), cols()); }
  std::span<const T> row(std::size_t r) const {
    return std::span<const T>(data_).subspan(r * cols(), cols());
  }

  void fill(T value) {
    for (auto& x : data_) x = value;
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return Tensor<U>(shape_, std::move(out));
  }

  bool operator==(const Tensor& other) const = default;

  static std::size_t element_count(const Shape& shape) {
    if (shape.empty() || shape.size() > 2) {
      throw ShapeError("unsupported tensor rank " + std::to_string(shape.size()));
    }
    std::size_t n = 1;
    for (auto e : shape) {
      if (e == 0) throw ShapeError("tensor extents must be positive: " + to_string(shape));
      n *= e;
    }
    return n;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

/// True when every element is finite.
template <typename T>
bool all_finite(const Tensor<T>& t);

extern template bool all_finite(const Tensor<float>&);
extern template bool all_finite(const Tensor<double>&);
extern template bool all_finite(const Tensor<long double>&);

}  // namespace uniecs
