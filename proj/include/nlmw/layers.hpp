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
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "nlmw/ops.hpp"

namespace nlmw {

// B sequences of equal length stacked row-wise: row b * length + t.
struct SequenceLayout {
  std::size_t batch = 1;
  std::size_t length = 0;
  std::size_t rows() const { return batch * length; }
};

enum class Activation { kTanh, kRelu };
enum class GlobalMode { kDisabled, kLearnedKernel, kUniformAverage };
enum class NormPosition { kPre, kPost };

// Which row a local window ends at. kBeforeRow: row t holds the k tokens
// preceding t (row t predicts token t). kAtRow: row t holds the k tokens
// ending at t (row t predicts token t + 1, the convention of the models).
enum class WindowEnd { kBeforeRow, kAtRow };

// Dropout mode plus the keys of the counter-based dropout streams.
struct LayerContext {
  Mode mode = Mode::kEval;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  CounterRng rng(std::string_view name) const { return CounterRng(seed, step, name); }
};

template <typename T>
struct ConcatLayerParams {
  std::size_t k = 1;
  Tensor<T> w_concat;       // [(k + g) * d_emb x d_concat]
  Tensor<T> bias;           // [d_concat]
  Tensor<T> proj;           // [d_concat x d_model]
  Tensor<T> pad_embedding;  // [d_emb]
  Activation activation = Activation::kRelu;
};

template <typename T>
struct GlobalKernelParams {
  GlobalMode mode = GlobalMode::kDisabled;
  std::size_t n_kernels = 0;
  std::size_t kernel_width = 1;
  Tensor<T> kernel_weights;  // [n_kernels x kernel_width]; unused for averages

  // Number of d_emb-sized vectors appended to the concatenation.
  std::size_t embeddings() const {
    switch (mode) {
      case GlobalMode::kLearnedKernel: return n_kernels;
      case GlobalMode::kUniformAverage: return 1;
      case GlobalMode::kDisabled: break;
    }
    return 0;
  }
};

template <typename T>
struct AttentionParams {
  std::size_t n_heads = 1;
  Tensor<T> w_q, w_k, w_v, w_o;  // each [d_model x d_model]
  std::optional<std::size_t> window;
  double attn_dropout = 0.0;
};

template <typename T>
struct FeedForwardBlockParams {
  Tensor<T> w1;  // [d_model x d_hidden]
  Tensor<T> w2;  // [d_hidden x d_model]
  Tensor<T> ln_gain, ln_bias;
  double dropout = 0.0;
  bool use_residual = true;
  bool use_layernorm = true;
  NormPosition norm = NormPosition::kPre;
  double ln_eps = 1e-5;
};

/// Frequency-clustered output layer.
///
/// Ids [0, cutoffs[0]) form the head; cluster i covers
/// [cutoffs[i], cutoffs[i+1]) with the vocabulary size closing the last one.
/// The head softmax has one extra logit per tail cluster. Tail words are
/// scored from a down-projected hidden state.
template <typename T>
struct AdaptiveSoftmaxParams {
  std::vector<std::size_t> cutoffs;
  std::size_t vocab_size = 0;
  Tensor<T> head_words;  // [cutoffs[0] x d]; undefined when tied to the embedding table
  Tensor<T> clusters;    // [n_tails x d]; undefined without tails
  std::vector<Tensor<T>> tail_proj;  // [d x d_i]
  std::vector<Tensor<T>> tail_out;   // [cluster_size_i x d_i]

  std::size_t head_size() const { return cutoffs.empty() ? vocab_size : cutoffs.front(); }
  std::size_t tails() const { return cutoffs.size(); }
  std::size_t cluster_begin(std::size_t i) const { return cutoffs[i]; }
  std::size_t cluster_end(std::size_t i) const {
    return i + 1 < cutoffs.size() ? cutoffs[i + 1] : vocab_size;
  }
};

void validate_cutoffs(std::span<const std::size_t> cutoffs, std::size_t vocab_size);

// Row t = [x_{t-k}; ...; x_{t-1}] (kBeforeRow) or [x_{t-k+1}; ...; x_t]
// (kAtRow) within each sequence; positions before the start use the pad.
template <typename T>
Tensor<T> concat_window(Tape<T>& tape, const Tensor<T>& embeddings, SequenceLayout layout,
                        std::size_t k, const Tensor<T>& pad_embedding,
                        WindowEnd end = WindowEnd::kBeforeRow);

// Aggregate of the embeddings strictly left of the local window.
//
// Learned kernels are depthwise causal 1-D convolutions over the distant
// region (left zero padding, one output per region position) mean-pooled
// over positions. Rows whose distant region is empty get zero vectors.
template <typename T>
Tensor<T> global_context_embed(Tape<T>& tape, const Tensor<T>& embeddings, SequenceLayout layout,
                               std::size_t k, const GlobalKernelParams<T>& params,
                               WindowEnd end = WindowEnd::kBeforeRow);

// activation([local ; global] * w_concat + bias) * proj
template <typename T>
Tensor<T> concat_layer_forward(Tape<T>& tape, const Tensor<T>& embeddings, SequenceLayout layout,
                               const ConcatLayerParams<T>& params,
                               std::type_identity_t<const GlobalKernelParams<T>*> global,
                               WindowEnd end = WindowEnd::kBeforeRow);

// Softmax weights [batch][head][t][j] of causal (optionally windowed)
// scaled dot-product attention; masked entries are exactly zero.
template <typename T>
std::vector<T> attention_probabilities(const Tensor<T>& q, const Tensor<T>& k,
                                       SequenceLayout layout, std::size_t n_heads,
                                       std::optional<std::size_t> window);

// Multi-head self-attention. Position t attends to positions j <= t, and with
// a window w only to j >= t - w.
template <typename T>
Tensor<T> causal_self_attention(Tape<T>& tape, const Tensor<T>& x, SequenceLayout layout,
                                const AttentionParams<T>& params, const LayerContext& ctx,
                                std::string_view name);

// Pre-norm residual feed-forward block: x + dropout(relu(LN(x) w1) w2).
template <typename T>
Tensor<T> feed_forward_block(Tape<T>& tape, const Tensor<T>& x,
                             const FeedForwardBlockParams<T>& params, const LayerContext& ctx,
                             std::string_view name);

// (h * tie_proj) * table^T. tie_proj may be undefined when h already has
// the embedding width.
template <typename T>
Tensor<T> tied_output_logits(Tape<T>& tape, const Tensor<T>& h, const Tensor<T>& embedding_table,
                             const Tensor<T>& tie_proj = {});

// Mean negative log-likelihood of `targets` under the adaptive softmax.
template <typename T>
Tensor<T> adaptive_softmax_nll(Tape<T>& tape, const Tensor<T>& h,
                               const AdaptiveSoftmaxParams<T>& params,
                               const Tensor<T>& embedding_table, std::span<const TokenId> targets);

// Per-row log P(targets[row]); not differentiable.
template <typename T>
std::vector<double> adaptive_softmax_logprobs(const Tensor<T>& h,
                                              const AdaptiveSoftmaxParams<T>& params,
                                              const Tensor<T>& embedding_table,
                                              std::span<const TokenId> targets);

// Full [rows x V] log-probability table; not differentiable.
template <typename T>
Tensor<T> adaptive_softmax_logprob_table(const Tensor<T>& h,
                                         const AdaptiveSoftmaxParams<T>& params,
                                         const Tensor<T>& embedding_table);

// Fixed sinusoidal encodings for positions 0..length-1, tiled over the batch.
template <typename T>
Tensor<T> sinusoidal_positions(SequenceLayout layout, std::size_t d_model);

}  // namespace nlmw
