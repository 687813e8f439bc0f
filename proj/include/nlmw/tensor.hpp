// Copyright 2026 The NLMW Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nlmw/errors.hpp"

namespace nlmw {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

template <typename T>
struct TensorStorage {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until the first accumulation
  bool requires_grad = false;
};

/// Shared handle to a dense row-major array with an optional gradient.
///
/// Copies of a handle alias the same storage. Operations never mutate their
/// inputs; they allocate fresh outputs. Only optimizers, initializers and
/// gradient accumulation write into existing storage.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  explicit operator bool() const { return defined(); }

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->data.size(); }
  // Size of the last axis; rows() * cols() == numel().
  std::size_t cols() const;
  std::size_t rows() const;

  std::span<const T> data() const { return impl_->data; }
  std::span<T> mutable_data() { return impl_->data; }
  T item() const;
  T at(std::size_t row, std::size_t col) const { return impl_->data[row * cols() + col]; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool value) { impl_->requires_grad = value; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  // Gradient buffer, allocated as zeros on first access.
  std::span<T> grad_buffer();
  // Gradient values, or zeros when nothing has been accumulated.
  std::vector<T> grad_or_zeros() const;
  void zero_grad();
  void drop_grad() { impl_->grad.clear(); }

  // Fresh storage with copied data and no gradient.
  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
  const void* id() const { return impl_.get(); }

 private:
  std::shared_ptr<TensorStorage<T>> impl_;
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace nlmw
