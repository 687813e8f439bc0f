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

#include "nlmw/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "nlmw/errors.hpp"

namespace nlmw {
namespace {

template <typename T>
double evaluate(const std::function<Tensor<T>(Tape<T>&)>& loss_fn) {
  Tape<T> tape;
  tape.set_recording(false);
  return static_cast<double>(loss_fn(tape).item());
}

}  // namespace

template <typename T>
GradCheckReport grad_check(const std::function<Tensor<T>(Tape<T>&)>& loss_fn,
                           std::span<Tensor<T>> params, double eps) {
  const double first = evaluate(loss_fn);
  const double second = evaluate(loss_fn);
  if (std::memcmp(&first, &second, sizeof(double)) != 0) {
    throw DeterminismError("grad_check: repeated evaluations differ (" + std::to_string(first) +
                           " vs " + std::to_string(second) + ")");
  }

  for (Tensor<T>& p : params) p.drop_grad();
  std::vector<std::vector<T>> tape_grads;
  {
    Tape<T> tape;
    Tensor<T> loss = loss_fn(tape);
    tape.backward(loss);
    for (Tensor<T>& p : params) tape_grads.push_back(p.grad_or_zeros());
  }

  GradCheckReport report;
  for (std::size_t ti = 0; ti < params.size(); ++ti) {
    std::span<T> values = params[ti].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const T saved = values[i];
      values[i] = static_cast<T>(saved + eps);
      const double up = evaluate(loss_fn);
      values[i] = static_cast<T>(saved - eps);
      const double down = evaluate(loss_fn);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = static_cast<double>(tape_grads[ti][i]);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      ++report.elements_checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.tensor_index = ti;
        report.element_index = i;
        report.tape_grad = analytic;
        report.numeric_grad = numeric;
      }
    }
  }
  return report;
}

template GradCheckReport grad_check<double>(const std::function<Tensor<double>(Tape<double>&)>&,
                                            std::span<Tensor<double>>, double);
template GradCheckReport grad_check<float>(const std::function<Tensor<float>(Tape<float>&)>&,
                                           std::span<Tensor<float>>, double);

}  // namespace nlmw
