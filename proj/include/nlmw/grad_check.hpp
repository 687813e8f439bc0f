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
#include <functional>
#include <span>
#include <string>

#include "nlmw/tape.hpp"
#include "nlmw/tensor.hpp"

namespace nlmw {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t tensor_index = 0;   // which entry of `params` holds the worst element
  std::size_t element_index = 0;
  double tape_grad = 0.0;
  double numeric_grad = 0.0;
  std::size_t elements_checked = 0;
};

/// Compares tape gradients of a scalar function against central differences.
///
/// `loss_fn` must be deterministic (dropout in eval mode); it is evaluated
/// twice up front and a DeterminismError is thrown if the results differ.
/// Relative error per element is |g_tape - g_fd| / max(|g_tape|, |g_fd|, 1e-8).
template <typename T>
GradCheckReport grad_check(const std::function<Tensor<T>(Tape<T>&)>& loss_fn,
                           std::span<Tensor<T>> params, double eps = 1e-5);

extern template GradCheckReport grad_check<double>(
    const std::function<Tensor<double>(Tape<double>&)>&, std::span<Tensor<double>>, double);
extern template GradCheckReport grad_check<float>(
    const std::function<Tensor<float>(Tape<float>&)>&, std::span<Tensor<float>>, double);

}  // namespace nlmw
