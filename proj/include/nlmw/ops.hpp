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

#include <cstdint>
#include <span>

#include "nlmw/rng.hpp"
#include "nlmw/tape.hpp"
#include "nlmw/tensor.hpp"

namespace nlmw {

using TokenId = std::int32_t;

enum class Mode { kTrain, kEval };

// Differentiable primitives. Each returns a fresh tensor and, when any input
// requires a gradient and the tape is recording, appends its backward rule.
// Matrices are rank-2 [rows x cols]; vectors passed as `b` to add/mul are
// broadcast over rows when they match the trailing axis.

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

// a[m x k] * b[n x k]^T -> [m x n]
template <typename T>
Tensor<T> matmul_nt(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, double factor);

// Subgradient at exactly zero is zero.
template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> tanh(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x);

// Per row over the last axis, with population variance.
template <typename T>
Tensor<T> layer_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& bias, double eps = 1e-5);

template <typename T>
Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& logits);

template <typename T>
Tensor<T> log_softmax(Tape<T>& tape, const Tensor<T>& logits);

// Mean over rows of -log softmax(logits)[row, target].
template <typename T>
Tensor<T> softmax_cross_entropy(Tape<T>& tape, const Tensor<T>& logits,
                                std::span<const TokenId> targets);

// Row gather; the backward pass scatter-adds, so repeated ids accumulate.
template <typename T>
Tensor<T> embedding_lookup(Tape<T>& tape, const Tensor<T>& table, std::span<const TokenId> ids);

// out[i] = x[i, cols[i]]
template <typename T>
Tensor<T> pick(Tape<T>& tape, const Tensor<T>& x, std::span<const TokenId> cols);

// Rows [begin, end) of a matrix.
template <typename T>
Tensor<T> slice_rows(Tape<T>& tape, const Tensor<T>& x, std::size_t begin, std::size_t end);

// Concatenation along the last axis of matrices with equal row counts.
template <typename T>
Tensor<T> concat_cols(Tape<T>& tape, std::span<const Tensor<T>> parts);

// Inverted dropout. Eval mode and p == 0 return `x` unchanged; otherwise
// element i is dropped when rng.uniform_at(i) < p.
template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& x, double p, Mode mode, const CounterRng& rng);

// Accumulates `delta` into t's gradient when t participates in autodiff.
template <typename T>
void accumulate_grad(Tensor<T> t, std::span<const T> delta);

}  // namespace nlmw
