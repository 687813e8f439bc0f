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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nlmw/layers.hpp"

namespace nlmw {

enum class ModelVariant { kNplmOld, kNplm, kTransformer, kTransformerN, kTransformerC };

std::string_view to_string(ModelVariant variant);
std::string_view to_string(GlobalMode mode);
std::string_view to_string(Activation activation);
std::string_view to_string(NormPosition position);
ModelVariant parse_variant(std::string_view text);
GlobalMode parse_global_mode(std::string_view text);
Activation parse_activation(std::string_view text);
NormPosition parse_norm_position(std::string_view text);

bool is_transformer_family(ModelVariant variant);

struct ModelConfig {
  ModelVariant variant = ModelVariant::kNplm;
  std::size_t n_layers = 4;
  std::size_t d_emb = 64;  // also the width of the residual stream
  std::size_t d_hidden = 256;
  std::size_t d_concat = 128;
  std::size_t n_heads = 4;
  std::size_t k_concat = 15;
  std::size_t n_global_kernels = 5;
  GlobalMode global_mode = GlobalMode::kLearnedKernel;
  std::size_t global_kernel_width = 3;
  std::size_t l0_window = 5;
  std::size_t vocab_size = 0;
  std::vector<std::size_t> adaptive_cutoffs;
  bool tie_weights = true;
  double dropout = 0.2;
  bool use_residual = true;
  bool use_layernorm = true;
  Activation activation = Activation::kRelu;
  NormPosition norm_position = NormPosition::kPre;
  double init_std = 0.02;
  double ln_eps = 1e-5;

  bool operator==(const ModelConfig&) const = default;
};

// Global context actually used by the model: disabled for the Transformer
// family and whenever no kernels are configured.
GlobalMode effective_global_mode(const ModelConfig& config);

// Desk-scale defaults for a variant (NPLM-old: one tanh layer, no residuals,
// layer norm or global context).
ModelConfig default_model_config(ModelVariant variant);

// One "field: reason" entry per violated constraint; empty when valid.
std::vector<std::string> config_problems(const ModelConfig& config);
void validate(const ModelConfig& config);

// Stable FNV-1a hash of every architecture field.
std::uint64_t config_hash(const ModelConfig& config);

/// A built language model. Row r of every output scores the token that
/// follows input position r, using only inputs 0..r.
template <typename T>
class Model {
 public:
  // Validates `config`; weights drawn from name-keyed streams of `seed`, so a
  // parameter's initial value depends only on (seed, name, shape).
  Model(ModelConfig config, std::uint64_t seed);

  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  std::span<Parameter<T>> parameters() { return params_; }
  std::span<const Parameter<T>> parameters() const { return params_; }
  const Tensor<T>* find(std::string_view name) const;
  Tensor<T>* find(std::string_view name);
  const Tensor<T>& embedding_table() const { return embed_; }

  // Deep copy with fresh storage.
  Model clone() const;
  void zero_grad();

  Tensor<T> hidden_states(Tape<T>& tape, std::span<const TokenId> ids, SequenceLayout layout,
                          const LayerContext& ctx) const;

  // [rows x V]: logits for the full-softmax head, log-probabilities for the
  // adaptive head.
  Tensor<T> output_scores(Tape<T>& tape, const Tensor<T>& hidden) const;

  // Mean negative log-likelihood of targets[r] given ids[..r].
  Tensor<T> loss(Tape<T>& tape, std::span<const TokenId> ids, std::span<const TokenId> targets,
                 SequenceLayout layout, const LayerContext& ctx) const;

  // Eval-mode log P(targets[r] | ids[..r]) for every row.
  std::vector<double> target_logprobs(std::span<const TokenId> ids,
                                      std::span<const TokenId> targets,
                                      SequenceLayout layout) const;

 private:
  struct Layer {
    enum class Mixer { kNone, kAttention, kConcat };
    Mixer mixer = Mixer::kNone;
    Tensor<T> mix_ln_gain, mix_ln_bias;
    AttentionParams<T> attention;
    ConcatLayerParams<T> concat;
    FeedForwardBlockParams<T> ff;
  };

  Tensor<T> make_param(const std::string& name, Shape shape, double mean, double stddev);
  Tensor<T> make_normal(const std::string& name, Shape shape);
  Tensor<T> make_const(const std::string& name, Shape shape, double value);
  ConcatLayerParams<T> make_concat(const std::string& prefix, std::size_t k, std::size_t g,
                                   std::size_t width, Activation activation);
  FeedForwardBlockParams<T> make_ff(const std::string& prefix);
  Tensor<T> mixer_sublayer(Tape<T>& tape, const Tensor<T>& x, const Layer& layer,
                           std::size_t index, SequenceLayout layout, const LayerContext& ctx) const;
  void check_inputs(std::span<const TokenId> ids, SequenceLayout layout) const;

  ModelConfig config_;
  std::uint64_t seed_ = 0;
  std::vector<Parameter<T>> params_;
  Tensor<T> embed_;
  ConcatLayerParams<T> nplm_concat_;
  GlobalKernelParams<T> global_;
  std::vector<Layer> layers_;
  Tensor<T> final_ln_gain_, final_ln_bias_;
  Tensor<T> out_weight_;  // untied full softmax
  bool adaptive_ = false;
  AdaptiveSoftmaxParams<T> adaptive_params_;
};

template <typename T>
Model<T> build_model(const ModelConfig& config, std::uint64_t seed) {
  return Model<T>(config, seed);
}

// Scores for a single sequence: [T x V].
template <typename T>
Tensor<T> forward_logits(const Model<T>& model, std::span<const TokenId> ids,
                         const LayerContext& ctx = {});

// Total scalar parameter count; a tied table is counted once.
template <typename T>
std::size_t count_parameters(const Model<T>& model);

extern template class Model<float>;
extern template class Model<double>;

}  // namespace nlmw
