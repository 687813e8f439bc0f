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

#include "nlmw/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace nlmw {
namespace {

std::string upper(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  }
  return out;
}

std::string double_text(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string_view to_string(ModelVariant variant) {
  switch (variant) {
    case ModelVariant::kNplmOld: return "NPLM_OLD";
    case ModelVariant::kNplm: return "NPLM";
    case ModelVariant::kTransformer: return "TRANSFORMER";
    case ModelVariant::kTransformerN: return "TRANSFORMER_N";
    case ModelVariant::kTransformerC: return "TRANSFORMER_C";
  }
  return "?";
}

std::string_view to_string(GlobalMode mode) {
  switch (mode) {
    case GlobalMode::kDisabled: return "disabled";
    case GlobalMode::kLearnedKernel: return "learned_kernel";
    case GlobalMode::kUniformAverage: return "uniform_average";
  }
  return "?";
}

std::string_view to_string(Activation activation) {
  return activation == Activation::kTanh ? "tanh" : "relu";
}

std::string_view to_string(NormPosition position) {
  return position == NormPosition::kPre ? "pre" : "post";
}

ModelVariant parse_variant(std::string_view text) {
  const std::string u = upper(text);
  for (ModelVariant v : {ModelVariant::kNplmOld, ModelVariant::kNplm, ModelVariant::kTransformer,
                         ModelVariant::kTransformerN, ModelVariant::kTransformerC}) {
    if (u == to_string(v)) return v;
  }
  throw ConfigError("unknown variant '" + std::string(text) +
                    "' (expected NPLM_OLD, NPLM, TRANSFORMER, TRANSFORMER_N or TRANSFORMER_C)");
}

GlobalMode parse_global_mode(std::string_view text) {
  for (GlobalMode m :
       {GlobalMode::kDisabled, GlobalMode::kLearnedKernel, GlobalMode::kUniformAverage}) {
    if (text == to_string(m)) return m;
  }
  throw ConfigError("unknown global_mode '" + std::string(text) +
                    "' (expected learned_kernel, uniform_average or disabled)");
}

Activation parse_activation(std::string_view text) {
  if (text == "tanh") return Activation::kTanh;
  if (text == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation '" + std::string(text) + "' (expected tanh or relu)");
}

NormPosition parse_norm_position(std::string_view text) {
  if (text == "pre") return NormPosition::kPre;
  if (text == "post") return NormPosition::kPost;
  throw ConfigError("unknown norm_position '" + std::string(text) + "' (expected pre or post)");
}

bool is_transformer_family(ModelVariant variant) {
  return variant == ModelVariant::kTransformer || variant == ModelVariant::kTransformerN ||
         variant == ModelVariant::kTransformerC;
}

GlobalMode effective_global_mode(const ModelConfig& config) {
  if (is_transformer_family(config.variant)) return GlobalMode::kDisabled;
  if (config.global_mode == GlobalMode::kLearnedKernel && config.n_global_kernels == 0) {
    return GlobalMode::kDisabled;
  }
  return config.global_mode;
}

ModelConfig default_model_config(ModelVariant variant) {
  ModelConfig c;
  c.variant = variant;
  switch (variant) {
    case ModelVariant::kNplmOld:
      c.n_layers = 1;
      c.k_concat = 5;
      c.d_emb = 60;
      c.d_hidden = 100;
      c.n_global_kernels = 0;
      c.global_mode = GlobalMode::kDisabled;
      c.activation = Activation::kTanh;
      c.use_residual = false;
      c.use_layernorm = false;
      c.dropout = 0.0;
      break;
    case ModelVariant::kNplm:
      break;
    case ModelVariant::kTransformer:
    case ModelVariant::kTransformerN:
    case ModelVariant::kTransformerC:
      c.n_global_kernels = 0;
      c.global_mode = GlobalMode::kDisabled;
      c.dropout = 0.1;
      break;
  }
  return c;
}

std::vector<std::string> config_problems(const ModelConfig& c) {
  std::vector<std::string> out;
  auto need = [&out](bool ok, const char* field, std::string reason) {
    if (!ok) out.push_back(std::string(field) + ": " + std::move(reason));
  };
  need(c.vocab_size >= 2, "vocab_size", "must be at least 2");
  need(c.n_layers >= 1, "n_layers", "must be at least 1");
  need(c.d_emb >= 1, "d_emb", "must be positive");
  need(c.d_hidden >= 1, "d_hidden", "must be positive");
  need(c.dropout >= 0.0 && c.dropout < 1.0, "dropout", "must lie in [0, 1)");
  need(std::isfinite(c.init_std) && c.init_std >= 0.0, "init_std", "must be finite and >= 0");
  need(c.ln_eps > 0.0, "ln_eps", "must be positive");
  if (!c.adaptive_cutoffs.empty()) {
    try {
      validate_cutoffs(c.adaptive_cutoffs, c.vocab_size);
    } catch (const std::exception& e) {
      out.push_back(std::string("adaptive_cutoffs: ") + e.what());
    }
  }
  switch (c.variant) {
    case ModelVariant::kNplmOld:
      need(c.n_layers == 1, "n_layers", "NPLM_OLD has exactly one layer");
      need(c.activation == Activation::kTanh, "activation", "NPLM_OLD uses tanh");
      need(!c.use_residual, "use_residual", "NPLM_OLD has no residual connections");
      need(!c.use_layernorm, "use_layernorm", "NPLM_OLD has no layer normalization");
      need(effective_global_mode(c) == GlobalMode::kDisabled, "global_mode",
           "NPLM_OLD has no global context");
      need(c.k_concat >= 1, "k_concat", "must be at least 1");
      break;
    case ModelVariant::kNplm:
      need(c.k_concat >= 1, "k_concat", "must be at least 1");
      need(c.d_concat >= 1, "d_concat", "must be positive");
      if (c.global_mode == GlobalMode::kLearnedKernel && c.n_global_kernels > 0) {
        need(c.global_kernel_width >= 1, "global_kernel_width", "must be at least 1");
      }
      break;
    case ModelVariant::kTransformerN:
      need(c.k_concat >= 1, "k_concat", "must be at least 1");
      need(c.d_concat >= 1, "d_concat", "must be positive");
      [[fallthrough]];
    case ModelVariant::kTransformer:
    case ModelVariant::kTransformerC:
      need(c.n_heads >= 1, "n_heads", "must be at least 1");
      need(c.n_heads >= 1 && c.d_emb % c.n_heads == 0, "n_heads", "must divide d_emb");
      if (c.variant == ModelVariant::kTransformerC) {
        need(c.l0_window >= 1, "l0_window", "TRANSFORMER_C requires l0_window >= 1");
      }
      break;
  }
  return out;
}

void validate(const ModelConfig& config) {
  const auto problems = config_problems(config);
  if (problems.empty()) return;
  std::string msg = "invalid model config";
  for (const auto& p : problems) msg += "; " + p;
  throw ConfigError(msg);
}

std::uint64_t config_hash(const ModelConfig& c) {
  std::ostringstream os;
  os << "variant=" << to_string(c.variant) << ";n_layers=" << c.n_layers << ";d_emb=" << c.d_emb
     << ";d_hidden=" << c.d_hidden << ";d_concat=" << c.d_concat << ";n_heads=" << c.n_heads
     << ";k_concat=" << c.k_concat << ";n_global_kernels=" << c.n_global_kernels
     << ";global_mode=" << to_string(c.global_mode)
     << ";global_kernel_width=" << c.global_kernel_width << ";l0_window=" << c.l0_window
     << ";vocab_size=" << c.vocab_size << ";adaptive_cutoffs=";
  for (std::size_t x : c.adaptive_cutoffs) os << x << ',';
  os << ";tie_weights=" << c.tie_weights << ";use_residual=" << c.use_residual
     << ";use_layernorm=" << c.use_layernorm << ";activation=" << to_string(c.activation)
     << ";norm_position=" << to_string(c.norm_position) << ";ln_eps=" << double_text(c.ln_eps);
  // dropout and init_std change training, not the shape of a checkpoint.
  return fnv1a64(os.str());
}

template <typename T>
Tensor<T> Model<T>::make_param(const std::string& name, Shape shape, double mean, double stddev) {
  Tensor<T> t = Tensor<T>::zeros(std::move(shape), true);
  CounterRng rng(seed_, 0, "init/" + name);
  for (T& v : t.mutable_data()) {
    v = static_cast<T>(stddev > 0.0 ? mean + stddev * rng.normal() : mean);
  }
  params_.push_back({name, t});
  return t;
}

template <typename T>
Tensor<T> Model<T>::make_normal(const std::string& name, Shape shape) {
  return make_param(name, std::move(shape), 0.0, config_.init_std);
}

template <typename T>
Tensor<T> Model<T>::make_const(const std::string& name, Shape shape, double value) {
  return make_param(name, std::move(shape), value, 0.0);
}

template <typename T>
ConcatLayerParams<T> Model<T>::make_concat(const std::string& prefix, std::size_t k,
                                           std::size_t g, std::size_t width,
                                           Activation activation) {
  const std::size_t d = config_.d_emb;
  ConcatLayerParams<T> p;
  p.k = k;
  p.activation = activation;
  p.pad_embedding = make_normal(prefix + ".pad", {d});
  p.w_concat = make_normal(prefix + ".w", {(k + g) * d, width});
  p.bias = make_const(prefix + ".b", {width}, 0.0);
  p.proj = make_normal(prefix + ".proj", {width, d});
  return p;
}

template <typename T>
FeedForwardBlockParams<T> Model<T>::make_ff(const std::string& prefix) {
  const std::size_t d = config_.d_emb;
  FeedForwardBlockParams<T> p;
  if (config_.use_layernorm) {
    p.ln_gain = make_const(prefix + ".ln.gain", {d}, 1.0);
    p.ln_bias = make_const(prefix + ".ln.bias", {d}, 0.0);
  }
  p.w1 = make_normal(prefix + ".w1", {d, config_.d_hidden});
  p.w2 = make_normal(prefix + ".w2", {config_.d_hidden, d});
  p.dropout = config_.dropout;
  p.use_residual = config_.use_residual;
  p.use_layernorm = config_.use_layernorm;
  p.norm = config_.norm_position;
  p.ln_eps = config_.ln_eps;
  return p;
}

template <typename T>
Model<T>::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)), seed_(seed) {
  validate(config_);
  const std::size_t d = config_.d_emb;
  const std::size_t V = config_.vocab_size;
  embed_ = make_normal("embed.weight", {V, d});

  if (!is_transformer_family(config_.variant)) {
    global_.mode = effective_global_mode(config_);
    global_.n_kernels = config_.n_global_kernels;
    global_.kernel_width = config_.global_kernel_width;
    if (global_.mode == GlobalMode::kLearnedKernel) {
      // Start near a plain average of the distant region.
      global_.kernel_weights =
          make_param("concat.kernels", {global_.n_kernels, global_.kernel_width},
                     1.0 / static_cast<double>(global_.kernel_width), config_.init_std);
    }
    const bool old = config_.variant == ModelVariant::kNplmOld;
    nplm_concat_ = make_concat("concat", config_.k_concat, global_.embeddings(),
                               old ? config_.d_hidden : config_.d_concat, config_.activation);
    for (std::size_t i = 1; i < config_.n_layers; ++i) {
      Layer layer;
      layer.ff = make_ff("layers." + std::to_string(i) + ".ff");
      layers_.push_back(std::move(layer));
    }
  } else {
    for (std::size_t i = 0; i < config_.n_layers; ++i) {
      const std::string prefix = "layers." + std::to_string(i);
      Layer layer;
      std::string mix;
      if (i == 0 && config_.variant == ModelVariant::kTransformerN) {
        layer.mixer = Layer::Mixer::kConcat;
        mix = prefix + ".concat";
      } else {
        layer.mixer = Layer::Mixer::kAttention;
        mix = prefix + ".attn";
      }
      if (config_.use_layernorm) {
        layer.mix_ln_gain = make_const(mix + ".ln.gain", {d}, 1.0);
        layer.mix_ln_bias = make_const(mix + ".ln.bias", {d}, 0.0);
      }
      if (layer.mixer == Layer::Mixer::kConcat) {
        layer.concat =
            make_concat(mix, config_.k_concat, 0, config_.d_concat, config_.activation);
      } else {
        AttentionParams<T>& a = layer.attention;
        a.n_heads = config_.n_heads;
        a.w_q = make_normal(mix + ".wq", {d, d});
        a.w_k = make_normal(mix + ".wk", {d, d});
        a.w_v = make_normal(mix + ".wv", {d, d});
        a.w_o = make_normal(mix + ".wo", {d, d});
        a.attn_dropout = config_.dropout;
        if (i == 0 && config_.variant == ModelVariant::kTransformerC) a.window = config_.l0_window;
      }
      layer.ff = make_ff(prefix + ".ff");
      layers_.push_back(std::move(layer));
    }
  }

  if (config_.use_layernorm && config_.norm_position == NormPosition::kPre) {
    final_ln_gain_ = make_const("final_ln.gain", {d}, 1.0);
    final_ln_bias_ = make_const("final_ln.bias", {d}, 0.0);
  }

  if (!config_.adaptive_cutoffs.empty()) {
    adaptive_ = true;
    AdaptiveSoftmaxParams<T>& a = adaptive_params_;
    a.cutoffs = config_.adaptive_cutoffs;
    a.vocab_size = V;
    if (!config_.tie_weights) a.head_words = make_normal("head.adaptive.words", {a.head_size(), d});
    a.clusters = make_normal("head.adaptive.clusters", {a.tails(), d});
    std::size_t shrink = 1;
    for (std::size_t i = 0; i < a.tails(); ++i) {
      shrink *= 4;
      const std::size_t di = std::max<std::size_t>(1, d / shrink);
      const std::string tail = "head.adaptive.tail" + std::to_string(i);
      a.tail_proj.push_back(make_normal(tail + ".proj", {d, di}));
      a.tail_out.push_back(make_normal(tail + ".out", {a.cluster_end(i) - a.cluster_begin(i), di}));
    }
  } else if (!config_.tie_weights) {
    out_weight_ = make_normal("head.out", {V, d});
  }
}

template <typename T>
const Tensor<T>* Model<T>::find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p.tensor;
  }
  return nullptr;
}

template <typename T>
Tensor<T>* Model<T>::find(std::string_view name) {
  for (auto& p : params_) {
    if (p.name == name) return &p.tensor;
  }
  return nullptr;
}

template <typename T>
Model<T> Model<T>::clone() const {
  Model copy(config_, seed_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto src = params_[i].tensor.data();
    auto dst = copy.params_[i].tensor.mutable_data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return copy;
}

template <typename T>
void Model<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template <typename T>
void Model<T>::check_inputs(std::span<const TokenId> ids, SequenceLayout layout) const {
  if (layout.rows() == 0) throw ShapeError("model: empty input");
  if (ids.size() != layout.rows()) {
    throw ShapeError("model: " + std::to_string(ids.size()) + " ids for layout " +
                     std::to_string(layout.batch) + "x" + std::to_string(layout.length));
  }
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
      throw IndexError("model: token id " + std::to_string(id) + " outside [0, " +
                       std::to_string(config_.vocab_size) + ")");
    }
  }
}

template <typename T>
Tensor<T> Model<T>::mixer_sublayer(Tape<T>& tape, const Tensor<T>& x, const Layer& layer,
                                   std::size_t index, SequenceLayout layout,
                                   const LayerContext& ctx) const {
  const bool pre = config_.norm_position == NormPosition::kPre;
  const bool ln = config_.use_layernorm;
  const std::string name = "layers." + std::to_string(index) +
                           (layer.mixer == Layer::Mixer::kConcat ? ".concat" : ".attn");
  const Tensor<T> in =
      ln && pre ? layer_norm(tape, x, layer.mix_ln_gain, layer.mix_ln_bias, config_.ln_eps) : x;
  Tensor<T> s = layer.mixer == Layer::Mixer::kConcat
                    ? concat_layer_forward(tape, in, layout, layer.concat, nullptr, WindowEnd::kAtRow)
                    : causal_self_attention(tape, in, layout, layer.attention, ctx, name);
  s = dropout(tape, s, config_.dropout, ctx.mode, ctx.rng(name + ".drop"));
  Tensor<T> y = config_.use_residual ? add(tape, x, s) : s;
  if (ln && !pre) y = layer_norm(tape, y, layer.mix_ln_gain, layer.mix_ln_bias, config_.ln_eps);
  return y;
}

template <typename T>
Tensor<T> Model<T>::hidden_states(Tape<T>& tape, std::span<const TokenId> ids,
                                  SequenceLayout layout, const LayerContext& ctx) const {
  check_inputs(ids, layout);
  Tensor<T> h = embedding_lookup(tape, embed_, ids);
  if (!is_transformer_family(config_.variant)) {
    const GlobalKernelParams<T>* global = global_.mode == GlobalMode::kDisabled ? nullptr : &global_;
    h = concat_layer_forward(tape, h, layout, nplm_concat_, global, WindowEnd::kAtRow);
    h = dropout(tape, h, config_.dropout, ctx.mode, ctx.rng("concat.drop"));
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      h = feed_forward_block(tape, h, layers_[i].ff, ctx, "layers." + std::to_string(i + 1) + ".ff");
    }
  } else {
    h = add(tape, h, sinusoidal_positions<T>(layout, config_.d_emb));
    h = dropout(tape, h, config_.dropout, ctx.mode, ctx.rng("embed.drop"));
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      h = mixer_sublayer(tape, h, layers_[i], i, layout, ctx);
      h = feed_forward_block(tape, h, layers_[i].ff, ctx, "layers." + std::to_string(i) + ".ff");
    }
  }
  if (final_ln_gain_) h = layer_norm(tape, h, final_ln_gain_, final_ln_bias_, config_.ln_eps);
  return h;
}

template <typename T>
Tensor<T> Model<T>::output_scores(Tape<T>& tape, const Tensor<T>& hidden) const {
  if (adaptive_) return adaptive_softmax_logprob_table(hidden, adaptive_params_, embed_);
  if (out_weight_) return matmul_nt(tape, hidden, out_weight_);
  return tied_output_logits(tape, hidden, embed_);
}

template <typename T>
Tensor<T> Model<T>::loss(Tape<T>& tape, std::span<const TokenId> ids,
                         std::span<const TokenId> targets, SequenceLayout layout,
                         const LayerContext& ctx) const {
  if (targets.size() != layout.rows()) {
    throw ShapeError("model: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(layout.rows()) + " rows");
  }
  const Tensor<T> h = hidden_states(tape, ids, layout, ctx);
  if (adaptive_) return adaptive_softmax_nll(tape, h, adaptive_params_, embed_, targets);
  return softmax_cross_entropy(tape, output_scores(tape, h), targets);
}

template <typename T>
std::vector<double> Model<T>::target_logprobs(std::span<const TokenId> ids,
                                              std::span<const TokenId> targets,
                                              SequenceLayout layout) const {
  if (targets.size() != layout.rows()) {
    throw ShapeError("model: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(layout.rows()) + " rows");
  }
  Tape<T> tape;
  NoRecordGuard<T> guard(tape);
  const Tensor<T> h = hidden_states(tape, ids, layout, LayerContext{});
  if (adaptive_) return adaptive_softmax_logprobs(h, adaptive_params_, embed_, targets);
  const Tensor<T> logits = output_scores(tape, h);
  const std::size_t V = logits.cols();
  std::vector<double> out(targets.size());
  for (std::size_t r = 0; r < targets.size(); ++r) {
    const TokenId t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= V) {
      throw IndexError("model: target " + std::to_string(t) + " outside vocabulary");
    }
    const T* row = logits.data().data() + r * V;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < V; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double z = 0.0;
    for (std::size_t j = 0; j < V; ++j) z += std::exp(static_cast<double>(row[j]) - mx);
    out[r] = static_cast<double>(row[t]) - mx - std::log(z);
  }
  return out;
}

template <typename T>
Tensor<T> forward_logits(const Model<T>& model, std::span<const TokenId> ids,
                         const LayerContext& ctx) {
  Tape<T> tape;
  NoRecordGuard<T> guard(tape);
  const SequenceLayout layout{1, ids.size()};
  return model.output_scores(tape, model.hidden_states(tape, ids, layout, ctx));
}

template <typename T>
std::size_t count_parameters(const Model<T>& model) {
  std::size_t n = 0;
  for (const auto& p : model.parameters()) n += p.tensor.numel();
  return n;
}

template class Model<float>;
template class Model<double>;
template Tensor<float> forward_logits(const Model<float>&, std::span<const TokenId>,
                                      const LayerContext&);
template Tensor<double> forward_logits(const Model<double>&, std::span<const TokenId>,
                                       const LayerContext&);
template std::size_t count_parameters(const Model<float>&);
template std::size_t count_parameters(const Model<double>&);

}  // namespace nlmw
