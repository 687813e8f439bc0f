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
#include <vector>

namespace nlmw::kernels {

// c[m x n] += a[m x k] * b[k x n], all row-major.
//
// Every c(i, j) accumulates its k products in ascending k order, whatever the
// values of m and n. Results for a row therefore do not depend on how many
// other rows are in the batch, which the causality and scoring tests rely on.
template <typename T>
void gemm_acc(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  constexpr std::size_t kBlockK = 64;
  constexpr std::size_t kBlockN = 256;
  for (std::size_t j0 = 0; j0 < n; j0 += kBlockN) {
    const std::size_t j1 = j0 + kBlockN < n ? j0 + kBlockN : n;
    for (std::size_t p0 = 0; p0 < k; p0 += kBlockK) {
      const std::size_t p1 = p0 + kBlockK < k ? p0 + kBlockK : k;
      for (std::size_t i = 0; i < m; ++i) {
        T* __restrict crow = c + i * n;
        const T* arow = a + i * k;
        for (std::size_t p = p0; p < p1; ++p) {
          const T av = arow[p];
          const T* __restrict brow = b + p * n;
          for (std::size_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
        }
      }
    }
  }
}

template <typename T>
std::vector<T> transpose(std::size_t rows, std::size_t cols, const T* a) {
  std::vector<T> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = a[i * cols + j];
  }
  return out;
}

}  // namespace nlmw::kernels
