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

#include "nlmw/layers.hpp"

#include <cmath>
#include <string>

namespace nlmw {
namespace {

template <typename T>
void require_rows(const Tensor<T>& x, SequenceLayout layout, const char* op) {
  if (x.rank() != 2 || x.rows() != layout.rows() || layout.length == 0) {
    throw ShapeError(std::string(op) + ": input " + shape_to_string(x.shape()) +
                     " does not match layout " + std::to_string(layout.batch) + "x" +
                     std::to_string(layout.length));
  }
}

std::ptrdiff_t window_shift(WindowEnd end) { return end == WindowEnd::kAtRow ? 1 : 0; }

// Length of the distant region (positions before the local window) for row t.
std::size_t distant_length(std::size_t t, std::size_t k, WindowEnd end) {
  const std::size_t p = t + static_cast<std::size_t>(window_shift(end));
  return p > k ? p - k : 0;
}

std::string join_name(std::string_view prefix, std::string_view suffix) {
  std::string out(prefix);
  out += '.';
  out += suffix;
  return out;
}

// Fused attention over precomputed projections q, k, v [rows x d].
template <typename T>
Tensor<T> attention_core(Tape<T>& tape, const Tensor<T>& q, const Tensor<T>& k,
                         const Tensor<T>& v, SequenceLayout layout, std::size_t n_heads,
                         std::optional<std::size_t> window, double p_drop, Mode mode,
                         const CounterRng& rng) {
  const std::size_t d = q.cols();
  const std::size_t dh = d / n_heads;
  const std::size_t len = layout.length;
  std::vector<T> probs = attention_probabilities(q, k, layout, n_heads, window);

  // Dropout on the attention weights; dropped[] holds the kept-and-rescaled weights.
  std::vector<T> dropped;
  std::vector<T> mask;
  const bool drop = mode == Mode::kTrain && p_drop > 0.0;
  if (drop) {
    if (!(p_drop < 1.0)) throw ConfigError("attention dropout must lie in [0, 1)");
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p_drop));
    mask.resize(probs.size());
    dropped.resize(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
      mask[i] = rng.uniform_at(i) < p_drop ? T{0} : keep_scale;
      dropped[i] = probs[i] * mask[i];
    }
  }
  const std::vector<T>& weights = drop ? dropped : probs;

  const auto vd = v.data();
  std::vector<T> out(layout.rows() * d, T{0});
  for (std::size_t b = 0; b < layout.batch; ++b) {
    for (std::size_t h = 0; h < n_heads; ++h) {
      const T* pbh = weights.data() + (b * n_heads + h) * len * len;
      for (std::size_t t = 0; t < len; ++t) {
        const std::size_t lo = window && t > *window ? t - *window : 0;
        T* orow = out.data() + (b * len + t) * d + h * dh;
        for (std::size_t j = lo; j <= t; ++j) {
          const T w = pbh[t * len + j];
          const T* vrow = vd.data() + (b * len + j) * d + h * dh;
          for (std::size_t c = 0; c < dh; ++c) orow[c] += w * vrow[c];
        }
      }
    }
  }
  Tensor<T> result({layout.rows(), d}, std::move(out));
  if (tape.needs_grad({&q, &k, &v})) {
    result.set_requires_grad(true);
    tape.record(result, {q, k, v},
                [q, k, v, result, layout, n_heads, window, dh, d, probs = std::move(probs),
                 mask = std::move(mask), dropped = std::move(dropped), drop]() {
                  const std::size_t len = layout.length;
                  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
                  const auto go = result.grad();
                  const auto qd = q.data();
                  const auto kd = k.data();
                  const auto vd = v.data();
                  std::vector<T> dq(q.numel(), T{0}), dk(k.numel(), T{0}), dv(v.numel(), T{0});
                  std::vector<double> dp(len);
                  for (std::size_t b = 0; b < layout.batch; ++b) {
                    for (std::size_t h = 0; h < n_heads; ++h) {
                      const std::size_t base = (b * n_heads + h) * len * len;
                      for (std::size_t t = 0; t < len; ++t) {
                        const std::size_t lo = window && t > *window ? t - *window : 0;
                        const T* gout = go.data() + (b * len + t) * d + h * dh;
                        double weighted = 0.0;
                        for (std::size_t j = lo; j <= t; ++j) {
                          const std::size_t idx = base + t * len + j;
                          const T* vrow = vd.data() + (b * len + j) * d + h * dh;
                          T* dvrow = dv.data() + (b * len + j) * d + h * dh;
                          const T w = drop ? dropped[idx] : probs[idx];
                          double g = 0.0;
                          for (std::size_t c = 0; c < dh; ++c) {
                            g += static_cast<double>(gout[c]) * vrow[c];
                            dvrow[c] += w * gout[c];
                          }
                          if (drop) g *= mask[idx];
                          dp[j] = g;
                          weighted += probs[idx] * g;
                        }
                        const T* qrow = qd.data() + (b * len + t) * d + h * dh;
                        T* dqrow = dq.data() + (b * len + t) * d + h * dh;
                        for (std::size_t j = lo; j <= t; ++j) {
                          const std::size_t idx = base + t * len + j;
                          const T ds = static_cast<T>(probs[idx] * (dp[j] - weighted)) * scale;
                          if (ds == T{0}) continue;
                          const T* krow = kd.data() + (b * len + j) * d + h * dh;
                          T* dkrow = dk.data() + (b * len + j) * d + h * dh;
                          for (std::size_t c = 0; c < dh; ++c) {
                            dqrow[c] += ds * krow[c];
                            dkrow[c] += ds * qrow[c];
                          }
                        }
                      }
                    }
                  }
                  accumulate_grad<T>(q, dq);
                  accumulate_grad<T>(k, dk);
                  accumulate_grad<T>(v, dv);
                });
  }
  return result;
}

}  // namespace

void validate_cutoffs(std::span<const std::size_t> cutoffs, std::size_t vocab_size) {
  for (std::size_t i = 0; i < cutoffs.size(); ++i) {
    if (cutoffs[i] == 0 || cutoffs[i] >= vocab_size) {
      throw ConfigError("adaptive softmax cutoff " + std::to_string(cutoffs[i]) +
                        " must lie in [1, vocab_size=" + std::to_string(vocab_size) + ")");
    }
    if (i > 0 && cutoffs[i] <= cutoffs[i - 1]) {
      throw ConfigError("adaptive softmax cutoffs must be strictly ascending");
    }
  }
}

template <typename T>
Tensor<T> concat_window(Tape<T>& tape, const Tensor<T>& embeddings, SequenceLayout layout,
                        std::size_t k, const Tensor<T>& pad_embedding, WindowEnd end) {
  require_rows(embeddings, layout, "concat_window");
  const std::size_t d = embeddings.cols();
  if (k == 0) throw ConfigError("concat_window: k must be at least 1");
  if (pad_embedding.numel() != d) {
    throw ShapeError("concat_window: pad embedding " + shape_to_string(pad_embedding.shape()) +
                     " does not match embedding width " + std::to_string(d));
  }
  const std::size_t len = layout.length;
  const std::ptrdiff_t shift = window_shift(end);
  const auto xd = embeddings.data();
  const auto pd = pad_embedding.data();
  std::vector<T> y(layout.rows() * k * d);
  for (std::size_t b = 0; b < layout.batch; ++b) {
    for (std::size_t t = 0; t < len; ++t) {
      T* dst = y.data() + (b * len + t) * k * d;
      for (std::size_t i = 0; i < k; ++i) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + shift -
                                   static_cast<std::ptrdiff_t>(k) + static_cast<std::ptrdiff_t>(i);
        const T* from = src < 0 ? pd.data() : xd.data() + (b * len + static_cast<std::size_t>(src)) * d;
        std::copy_n(from, d, dst + i * d);
      }
    }
  }
  Tensor<T> out({layout.rows(), k * d}, std::move(y));
  if (tape.needs_grad({&embeddings, &pad_embedding})) {
    out.set_requires_grad(true);
    tape.record(out, {embeddings, pad_embedding},
                [embeddings, pad_embedding, out, layout, k, d, shift]() {
                  const std::size_t len = layout.length;
                  const auto g = out.grad();
                  std::vector<T> dx(embeddings.numel(), T{0});
                  std::vector<T> dpad(d, T{0});
                  for (std::size_t b = 0; b < layout.batch; ++b) {
                    for (std::size_t t = 0; t < len; ++t) {
                      const T* src_grad = g.data() + (b * len + t) * k * d;
                      for (std::size_t i = 0; i < k; ++i) {
                        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + shift -
                                                   static_cast<std::ptrdiff_t>(k) +
                                                   static_cast<std::ptrdiff_t>(i);
                        T* dst = src < 0 ? dpad.data()
                                         : dx.data() + (b * len + static_cast<std::size_t>(src)) * d;
                        for (std::size_t c = 0; c < d; ++c) dst[c] += src_grad[i * d + c];
                      }
                    }
                  }
                  accumulate_grad<T>(embeddings, dx);
                  accumulate_grad<T>(pad_embedding, dpad);
                });
  }
  return out;
}

template <typename T>
Tensor<T> global_context_embed(Tape<T>& tape, const Tensor<T>& embeddings, SequenceLayout layout,
                               std::size_t k, const GlobalKernelParams<T>& params,
                               WindowEnd end) {
  require_rows(embeddings, layout, "global_context_embed");
  const std::size_t g = params.embeddings();
  if (g == 0) throw ConfigError("global_context_embed: global context is disabled");
  const bool learned = params.mode == GlobalMode::kLearnedKernel;
  const std::size_t width = params.kernel_width;
  if (learned) {
    if (width == 0) throw ConfigError("global kernel width must be at least 1");
    if (!params.kernel_weights || params.kernel_weights.numel() != g * width) {
      throw ShapeError("global kernel weights must have shape [" + std::to_string(g) + "x" +
                       std::to_string(width) + "]");
    }
  }
  const std::size_t d = embeddings.cols();
  const std::size_t len = layout.length;
  const auto xd = embeddings.data();

  // prefix[b][a] = sum of the first a embeddings of sequence b.
  std::vector<double> prefix(layout.batch * (len + 1) * d, 0.0);
  for (std::size_t b = 0; b < layout.batch; ++b) {
    double* pb = prefix.data() + b * (len + 1) * d;
    for (std::size_t a = 0; a < len; ++a) {
      for (std::size_t c = 0; c < d; ++c) pb[(a + 1) * d + c] = pb[a * d + c] + xd[(b * len + a) * d + c];
    }
  }

  std::vector<T> y(layout.rows() * g * d, T{0});
  const auto wd = learned ? params.kernel_weights.data() : std::span<const T>{};
  std::vector<double> acc(d);
  for (std::size_t b = 0; b < layout.batch; ++b) {
    const double* pb = prefix.data() + b * (len + 1) * d;
    for (std::size_t t = 0; t < len; ++t) {
      const std::size_t m = distant_length(t, k, end);
      if (m == 0) continue;
      const double inv_m = 1.0 / static_cast<double>(m);
      T* dst = y.data() + (b * len + t) * g * d;
      if (!learned) {
        for (std::size_t c = 0; c < d; ++c) dst[c] = static_cast<T>(pb[m * d + c] * inv_m);
        continue;
      }
      for (std::size_t j = 0; j < g; ++j) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t i = 0; i < width; ++i) {
          const std::ptrdiff_t a = static_cast<std::ptrdiff_t>(m + 1 + i) - static_cast<std::ptrdiff_t>(width);
          if (a <= 0) continue;
          const double w = wd[j * width + i];
          for (std::size_t c = 0; c < d; ++c) acc[c] += w * pb[static_cast<std::size_t>(a) * d + c];
        }
        for (std::size_t c = 0; c < d; ++c) dst[j * d + c] = static_cast<T>(acc[c] * inv_m);
      }
    }
  }
  Tensor<T> out({layout.rows(), g * d}, std::move(y));
  const Tensor<T> kernel = learned ? params.kernel_weights : Tensor<T>{};
  if (tape.needs_grad({&embeddings, &kernel})) {
    out.set_requires_grad(true);
    std::vector<Tensor<T>> inputs{embeddings};
    if (learned) inputs.push_back(kernel);
    tape.record(out, inputs,
                [embeddings, kernel, out, layout, k, end, g, d, width, learned,
                 prefix = std::move(prefix)]() {
                  const std::size_t len = layout.length;
                  const auto go = out.grad();
                  const auto wd = learned ? kernel.data() : std::span<const T>{};
                  std::vector<T> dx(embeddings.numel(), T{0});
                  std::vector<T> dw(learned ? g * width : 0, T{0});
                  std::vector<double> dprefix((len + 1) * d);
                  std::vector<double> suffix(d);
                  for (std::size_t b = 0; b < layout.batch; ++b) {
                    const double* pb = prefix.data() + b * (len + 1) * d;
                    std::fill(dprefix.begin(), dprefix.end(), 0.0);
                    for (std::size_t t = 0; t < len; ++t) {
                      const std::size_t m = distant_length(t, k, end);
                      if (m == 0) continue;
                      const double inv_m = 1.0 / static_cast<double>(m);
                      const T* gr = go.data() + (b * len + t) * g * d;
                      if (!learned) {
                        for (std::size_t c = 0; c < d; ++c) dprefix[m * d + c] += gr[c] * inv_m;
                        continue;
                      }
                      for (std::size_t j = 0; j < g; ++j) {
                        for (std::size_t i = 0; i < width; ++i) {
                          const std::ptrdiff_t a = static_cast<std::ptrdiff_t>(m + 1 + i) -
                                                   static_cast<std::ptrdiff_t>(width);
                          if (a <= 0) continue;
                          const std::size_t au = static_cast<std::size_t>(a);
                          const double w = wd[j * width + i] * inv_m;
                          double dot = 0.0;
                          for (std::size_t c = 0; c < d; ++c) {
                            dprefix[au * d + c] += w * gr[j * d + c];
                            dot += static_cast<double>(gr[j * d + c]) * pb[au * d + c];
                          }
                          dw[j * width + i] += static_cast<T>(dot * inv_m);
                        }
                      }
                    }
                    // prefix[a] sums x[0..a), so x[q] receives every dprefix[a] with a > q.
                    std::fill(suffix.begin(), suffix.end(), 0.0);
                    for (std::size_t a = len; a >= 1; --a) {
                      for (std::size_t c = 0; c < d; ++c) {
                        suffix[c] += dprefix[a * d + c];
                        dx[(b * len + a - 1) * d + c] = static_cast<T>(suffix[c]);
                      }
                    }
                  }
                  accumulate_grad<T>(embeddings, dx);
                  if (learned) accumulate_grad<T>(kernel, dw);
                });
  }
  return out;
}

template <typename T>
Tensor<T> concat_layer_forward(Tape<T>& tape, const Tensor<T>& embeddings, SequenceLayout layout,
                               const ConcatLayerParams<T>& params,
                               std::type_identity_t<const GlobalKernelParams<T>*> global, WindowEnd end) {
  const std::size_t d = embeddings.cols();
  const std::size_t g = global != nullptr ? global->embeddings() : 0;
  if (params.w_concat.rank() != 2 || params.w_concat.shape()[0] != (params.k + g) * d) {
    throw ShapeError("concat layer weight " + shape_to_string(params.w_concat.shape()) +
                     " does not match (k + g) * d_emb = " + std::to_string((params.k + g) * d));
  }
  Tensor<T> features = concat_window(tape, embeddings, layout, params.k, params.pad_embedding, end);
  if (g > 0) {
    const Tensor<T> parts[] = {features,
                               global_context_embed(tape, embeddings, layout, params.k, *global, end)};
    features = concat_cols<T>(tape, parts);
  }
  Tensor<T> hidden = add(tape, matmul(tape, features, params.w_concat), params.bias);
  hidden = params.activation == Activation::kTanh ? tanh(tape, hidden) : relu(tape, hidden);
  return matmul(tape, hidden, params.proj);
}

template <typename T>
std::vector<T> attention_probabilities(const Tensor<T>& q, const Tensor<T>& k,
                                       SequenceLayout layout, std::size_t n_heads,
                                       std::optional<std::size_t> window) {
  require_rows(q, layout, "attention");
  require_rows(k, layout, "attention");
  const std::size_t d = q.cols();
  if (n_heads == 0 || d % n_heads != 0) {
    throw ConfigError("attention: d_model " + std::to_string(d) + " not divisible by " +
                      std::to_string(n_heads) + " heads");
  }
  if (window && *window < 1) throw ConfigError("attention window must be at least 1");
  const std::size_t dh = d / n_heads;
  const std::size_t len = layout.length;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto qd = q.data();
  const auto kd = k.data();
  std::vector<T> probs(layout.batch * n_heads * len * len, T{0});
  std::vector<double> scores(len);
  for (std::size_t b = 0; b < layout.batch; ++b) {
    for (std::size_t h = 0; h < n_heads; ++h) {
      T* pbh = probs.data() + (b * n_heads + h) * len * len;
      for (std::size_t t = 0; t < len; ++t) {
        const std::size_t lo = window && t > *window ? t - *window : 0;
        const T* qrow = qd.data() + (b * len + t) * d + h * dh;
        double mx = -INFINITY;
        for (std::size_t j = lo; j <= t; ++j) {
          const T* krow = kd.data() + (b * len + j) * d + h * dh;
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) s += static_cast<double>(qrow[c]) * krow[c];
          scores[j] = s * scale;
          mx = std::max(mx, scores[j]);
        }
        double total = 0.0;
        for (std::size_t j = lo; j <= t; ++j) {
          scores[j] = std::exp(scores[j] - mx);
          total += scores[j];
        }
        for (std::size_t j = lo; j <= t; ++j) pbh[t * len + j] = static_cast<T>(scores[j] / total);
      }
    }
  }
  return probs;
}

template <typename T>
Tensor<T> causal_self_attention(Tape<T>& tape, const Tensor<T>& x, SequenceLayout layout,
                                const AttentionParams<T>& params, const LayerContext& ctx,
                                std::string_view name) {
  require_rows(x, layout, "causal_self_attention");
  if (params.window && *params.window < 1) {
    throw ConfigError("attention window must be at least 1");
  }
  const Tensor<T> q = matmul(tape, x, params.w_q);
  const Tensor<T> k = matmul(tape, x, params.w_k);
  const Tensor<T> v = matmul(tape, x, params.w_v);
  const Tensor<T> mixed = attention_core(tape, q, k, v, layout, params.n_heads, params.window,
                                         params.attn_dropout, ctx.mode,
                                         ctx.rng(join_name(name, "attn_drop")));
  return matmul(tape, mixed, params.w_o);
}

template <typename T>
Tensor<T> feed_forward_block(Tape<T>& tape, const Tensor<T>& x,
                             const FeedForwardBlockParams<T>& params, const LayerContext& ctx,
                             std::string_view name) {
  const bool pre = params.norm == NormPosition::kPre;
  Tensor<T> h = params.use_layernorm && pre
                    ? layer_norm(tape, x, params.ln_gain, params.ln_bias, params.ln_eps)
                    : x;
  h = matmul(tape, relu(tape, matmul(tape, h, params.w1)), params.w2);
  h = dropout(tape, h, params.dropout, ctx.mode, ctx.rng(join_name(name, "drop")));
  Tensor<T> y = params.use_residual ? add(tape, x, h) : h;
  if (params.use_layernorm && !pre) y = layer_norm(tape, y, params.ln_gain, params.ln_bias, params.ln_eps);
  return y;
}

template <typename T>
Tensor<T> tied_output_logits(Tape<T>& tape, const Tensor<T>& h, const Tensor<T>& embedding_table,
                             const Tensor<T>& tie_proj) {
  if (!tie_proj && h.cols() != embedding_table.cols()) {
    throw ConfigError("tied output: hidden width " + std::to_string(h.cols()) +
                      " differs from embedding width " + std::to_string(embedding_table.cols()) +
                      " and no tie projection is configured");
  }
  const Tensor<T> projected = tie_proj ? matmul(tape, h, tie_proj) : h;
  return matmul_nt(tape, projected, embedding_table);
}

namespace {

template <typename T>
Tensor<T> adaptive_head_logprobs(Tape<T>& tape, const Tensor<T>& h,
                                 const AdaptiveSoftmaxParams<T>& params,
                                 const Tensor<T>& embedding_table) {
  validate_cutoffs(params.cutoffs, params.vocab_size);
  Tensor<T> words = params.head_words;
  if (!words) {
    words = params.head_size() == embedding_table.rows()
                ? embedding_table
                : slice_rows(tape, embedding_table, 0, params.head_size());
  }
  Tensor<T> logits = matmul_nt(tape, h, words);
  if (params.tails() > 0) {
    const Tensor<T> parts[] = {logits, matmul_nt(tape, h, params.clusters)};
    logits = concat_cols<T>(tape, parts);
  }
  return log_softmax(tape, logits);
}

template <typename T>
Tensor<T> tail_logprobs(Tape<T>& tape, const Tensor<T>& h, const AdaptiveSoftmaxParams<T>& params,
                        std::size_t tail) {
  return log_softmax(tape, matmul_nt(tape, matmul(tape, h, params.tail_proj[tail]),
                                     params.tail_out[tail]));
}

template <typename T>
std::size_t cluster_of(const AdaptiveSoftmaxParams<T>& params, TokenId id) {
  std::size_t c = 0;
  while (c < params.tails() && static_cast<std::size_t>(id) >= params.cluster_begin(c)) ++c;
  return c;  // 0 = head, i + 1 = tail i
}

template <typename T>
void check_targets(const Tensor<T>& h, const AdaptiveSoftmaxParams<T>& params,
                   std::span<const TokenId> targets) {
  if (targets.size() != h.rows()) throw ShapeError("adaptive softmax: one target per row required");
  for (TokenId t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= params.vocab_size) {
      throw IndexError("adaptive softmax: target " + std::to_string(t) + " outside vocabulary");
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> adaptive_softmax_nll(Tape<T>& tape, const Tensor<T>& h,
                               const AdaptiveSoftmaxParams<T>& params,
                               const Tensor<T>& embedding_table, std::span<const TokenId> targets) {
  check_targets(h, params, targets);
  const Tensor<T> head = adaptive_head_logprobs(tape, h, params, embedding_table);
  const std::size_t head_size = params.head_size();
  std::vector<TokenId> head_cols(targets.size());
  std::vector<std::vector<TokenId>> rows(params.tails()), local(params.tails());
  for (std::size_t r = 0; r < targets.size(); ++r) {
    const std::size_t c = cluster_of(params, targets[r]);
    if (c == 0) {
      head_cols[r] = targets[r];
    } else {
      head_cols[r] = static_cast<TokenId>(head_size + c - 1);
      rows[c - 1].push_back(static_cast<TokenId>(r));
      local[c - 1].push_back(targets[r] - static_cast<TokenId>(params.cluster_begin(c - 1)));
    }
  }
  Tensor<T> total = sum(tape, pick(tape, head, head_cols));
  for (std::size_t i = 0; i < params.tails(); ++i) {
    if (rows[i].empty()) continue;
    const Tensor<T> hs = embedding_lookup(tape, h, rows[i]);
    total = add(tape, total, sum(tape, pick(tape, tail_logprobs(tape, hs, params, i), local[i])));
  }
  return scale(tape, total, -1.0 / static_cast<double>(targets.size()));
}

template <typename T>
std::vector<double> adaptive_softmax_logprobs(const Tensor<T>& h,
                                              const AdaptiveSoftmaxParams<T>& params,
                                              const Tensor<T>& embedding_table,
                                              std::span<const TokenId> targets) {
  check_targets(h, params, targets);
  Tape<T> tape;
  tape.set_recording(false);
  const Tensor<T> head = adaptive_head_logprobs(tape, h, params, embedding_table);
  const std::size_t head_size = params.head_size();
  std::vector<double> out(targets.size());
  std::vector<std::vector<TokenId>> rows(params.tails());
  for (std::size_t r = 0; r < targets.size(); ++r) {
    const std::size_t c = cluster_of(params, targets[r]);
    if (c == 0) {
      out[r] = head.at(r, static_cast<std::size_t>(targets[r]));
    } else {
      out[r] = head.at(r, head_size + c - 1);
      rows[c - 1].push_back(static_cast<TokenId>(r));
    }
  }
  for (std::size_t i = 0; i < params.tails(); ++i) {
    if (rows[i].empty()) continue;
    const Tensor<T> lp = tail_logprobs(tape, embedding_lookup(tape, h, rows[i]), params, i);
    for (std::size_t n = 0; n < rows[i].size(); ++n) {
      const std::size_t r = static_cast<std::size_t>(rows[i][n]);
      out[r] += lp.at(n, static_cast<std::size_t>(targets[r]) - params.cluster_begin(i));
    }
  }
  return out;
}

template <typename T>
Tensor<T> adaptive_softmax_logprob_table(const Tensor<T>& h,
                                         const AdaptiveSoftmaxParams<T>& params,
                                         const Tensor<T>& embedding_table) {
  Tape<T> tape;
  tape.set_recording(false);
  const Tensor<T> head = adaptive_head_logprobs(tape, h, params, embedding_table);
  if (params.tails() == 0) return head;
  const std::size_t rows = h.rows(), vocab = params.vocab_size, head_size = params.head_size();
  std::vector<T> table(rows * vocab);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < head_size; ++j) table[r * vocab + j] = head.at(r, j);
  }
  for (std::size_t i = 0; i < params.tails(); ++i) {
    const Tensor<T> lp = tail_logprobs(tape, h, params, i);
    const std::size_t begin = params.cluster_begin(i), size = params.cluster_end(i) - begin;
    for (std::size_t r = 0; r < rows; ++r) {
      const T cluster_lp = head.at(r, head_size + i);
      for (std::size_t j = 0; j < size; ++j) table[r * vocab + begin + j] = cluster_lp + lp.at(r, j);
    }
  }
  return Tensor<T>({rows, vocab}, std::move(table));
}

template <typename T>
Tensor<T> sinusoidal_positions(SequenceLayout layout, std::size_t d_model) {
  std::vector<T> pe(layout.rows() * d_model);
  for (std::size_t t = 0; t < layout.length; ++t) {
    for (std::size_t i = 0; i < d_model; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(d_model));
      const double angle = static_cast<double>(t) * freq;
      const T value = static_cast<T>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
      for (std::size_t b = 0; b < layout.batch; ++b) pe[(b * layout.length + t) * d_model + i] = value;
    }
  }
  return Tensor<T>({layout.rows(), d_model}, std::move(pe));
}

#define NLMW_INSTANTIATE_LAYERS(T)                                                                \
  template Tensor<T> concat_window<T>(Tape<T>&, const Tensor<T>&, SequenceLayout, std::size_t,    \
                                      const Tensor<T>&, WindowEnd);                               \
  template Tensor<T> global_context_embed<T>(Tape<T>&, const Tensor<T>&, SequenceLayout,          \
                                             std::size_t, const GlobalKernelParams<T>&,           \
                                             WindowEnd);                                          \
  template Tensor<T> concat_layer_forward<T>(Tape<T>&, const Tensor<T>&, SequenceLayout,          \
                                             const ConcatLayerParams<T>&,                         \
                                             const GlobalKernelParams<T>*, WindowEnd);            \
  template std::vector<T> attention_probabilities<T>(const Tensor<T>&, const Tensor<T>&,          \
                                                     SequenceLayout, std::size_t,                 \
                                                     std::optional<std::size_t>);                 \
  template Tensor<T> causal_self_attention<T>(Tape<T>&, const Tensor<T>&, SequenceLayout,         \
                                              const AttentionParams<T>&, const LayerContext&,     \
                                              std::string_view);                                  \
  template Tensor<T> feed_forward_block<T>(Tape<T>&, const Tensor<T>&,                            \
                                           const FeedForwardBlockParams<T>&, const LayerContext&, \
                                           std::string_view);                                     \
  template Tensor<T> tied_output_logits<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&,          \
                                           const Tensor<T>&);                                     \
  template Tensor<T> adaptive_softmax_nll<T>(Tape<T>&, const Tensor<T>&,                          \
                                             const AdaptiveSoftmaxParams<T>&, const Tensor<T>&,   \
                                             std::span<const TokenId>);                           \
  template std::vector<double> adaptive_softmax_logprobs<T>(                                      \
      const Tensor<T>&, const AdaptiveSoftmaxParams<T>&, const Tensor<T>&,                        \
      std::span<const TokenId>);                                                                  \
  template Tensor<T> adaptive_softmax_logprob_table<T>(const Tensor<T>&,                          \
                                                       const AdaptiveSoftmaxParams<T>&,           \
                                                       const Tensor<T>&);                         \
  template Tensor<T> sinusoidal_positions<T>(SequenceLayout, std::size_t);

NLMW_INSTANTIATE_LAYERS(float)
NLMW_INSTANTIATE_LAYERS(double)

}  // namespace nlmw
