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

#include "nlmw/gradcheck_suite.hpp"

#include "nlmw/layers.hpp"
#include "nlmw/model.hpp"
#include "nlmw/ops.hpp"
#include "nlmw/rng.hpp"

namespace nlmw {
namespace {

using D = double;
using LossFn = std::function<Tensor<D>(Tape<D>&)>;

class Suite {
 public:
  Suite(const GradCheckSuiteConfig& config, const std::function<void(const GradCheckCase&)>& cb)
      : config_(config), cb_(cb), rng_(config.seed, 0, "gradcheck") {}

  Tensor<D> rand(Shape shape, double lo = -1.0, double hi = 1.0, bool grad = true) {
    std::size_t n = 1;
    for (std::size_t s : shape) n *= s;
    std::vector<D> v(n);
    for (D& x : v) x = lo + (hi - lo) * rng_.uniform();
    return Tensor<D>(std::move(shape), std::move(v), grad);
  }

  std::vector<TokenId> ids(std::size_t n, std::size_t vocab) {
    std::vector<TokenId> out(n);
    for (TokenId& t : out) t = static_cast<TokenId>(rng_.next_u64() % vocab);
    return out;
  }

  // sum(f(x) * R) for a fixed random R keeps every output element in play.
  LossFn weighted(std::function<Tensor<D>(Tape<D>&)> f, const Shape& out_shape) {
    Tensor<D> r = rand(out_shape, -1.0, 1.0, false);
    return [f = std::move(f), r](Tape<D>& tape) { return sum(tape, mul(tape, f(tape), r)); };
  }

  void check(std::string name, const LossFn& loss, std::vector<Tensor<D>> params) {
    GradCheckCase c;
    c.name = std::move(name);
    c.report = grad_check<D>(loss, params);
    c.passed = c.report.max_rel_error < config_.tolerance;
    if (cb_) cb_(c);
    cases_.push_back(std::move(c));
  }

  std::vector<GradCheckCase> take() { return std::move(cases_); }
  const GradCheckSuiteConfig& config() const { return config_; }

 private:
  GradCheckSuiteConfig config_;
  std::function<void(const GradCheckCase&)> cb_;
  CounterRng rng_;
  std::vector<GradCheckCase> cases_;
};

void primitives(Suite& s) {
  const std::size_t r = 5, c = 4, inner = 3;
  {
    auto a = s.rand({r, inner}), b = s.rand({inner, c});
    s.check("op/matmul", s.weighted([=](Tape<D>& t) { return matmul(t, a, b); }, {r, c}), {a, b});
  }
  {
    auto a = s.rand({r, inner}), b = s.rand({c, inner});
    s.check("op/matmul_nt", s.weighted([=](Tape<D>& t) { return matmul_nt(t, a, b); }, {r, c}),
            {a, b});
  }
  {
    auto a = s.rand({r, c}), b = s.rand({r, c}), bias = s.rand({c});
    s.check("op/add", s.weighted([=](Tape<D>& t) { return add(t, a, b); }, {r, c}), {a, b});
    s.check("op/add_broadcast", s.weighted([=](Tape<D>& t) { return add(t, a, bias); }, {r, c}),
            {a, bias});
    s.check("op/mul", s.weighted([=](Tape<D>& t) { return mul(t, a, b); }, {r, c}), {a, b});
    s.check("op/scale", s.weighted([=](Tape<D>& t) { return scale(t, a, -1.7); }, {r, c}), {a});
    s.check("op/relu", s.weighted([=](Tape<D>& t) { return relu(t, a); }, {r, c}), {a});
    s.check("op/tanh", s.weighted([=](Tape<D>& t) { return tanh(t, a); }, {r, c}), {a});
    s.check("op/sum", [=](Tape<D>& t) { return sum(t, mul(t, a, a)); }, {a});
    s.check("op/mean", [=](Tape<D>& t) { return mean(t, mul(t, a, a)); }, {a});
    s.check("op/softmax", s.weighted([=](Tape<D>& t) { return softmax(t, a); }, {r, c}), {a});
    s.check("op/log_softmax", s.weighted([=](Tape<D>& t) { return log_softmax(t, a); }, {r, c}),
            {a});
  }
  {
    auto x = s.rand({r, c}), gain = s.rand({c}, 0.5, 1.5), bias = s.rand({c});
    s.check("op/layer_norm",
            s.weighted([=](Tape<D>& t) { return layer_norm(t, x, gain, bias); }, {r, c}),
            {x, gain, bias});
  }
  {
    auto logits = s.rand({r, c}, -2.0, 2.0);
    const auto targets = s.ids(r, c);
    s.check("op/softmax_cross_entropy",
            [=](Tape<D>& t) { return softmax_cross_entropy(t, logits, targets); }, {logits});
    s.check("op/pick", s.weighted([=](Tape<D>& t) { return pick(t, logits, targets); }, {r}),
            {logits});
  }
  {
    auto table = s.rand({7, c});
    const auto rows = s.ids(9, 7);
    s.check("op/embedding_lookup",
            s.weighted([=](Tape<D>& t) { return embedding_lookup(t, table, rows); }, {9, c}),
            {table});
  }
  {
    auto x = s.rand({r, c}), y = s.rand({r, 2});
    s.check("op/slice_rows",
            s.weighted([=](Tape<D>& t) { return slice_rows(t, x, 1, 4); }, {3, c}), {x});
    s.check("op/concat_cols",
            s.weighted(
                [=](Tape<D>& t) {
                  const Tensor<D> parts[] = {x, y};
                  return concat_cols(t, std::span<const Tensor<D>>(parts));
                },
                {r, c + 2}),
            {x, y});
    const CounterRng mask_rng(s.config().seed, 1, "gradcheck/dropout");
    s.check("op/dropout",
            s.weighted([=](Tape<D>& t) { return dropout(t, x, 0.3, Mode::kTrain, mask_rng); },
                       {r, c}),
            {x});
  }
}

void layers(Suite& s) {
  const std::size_t d = s.config().d_emb, T = s.config().seq_len;
  const SequenceLayout layout{2, T / 2};
  const std::size_t rows = layout.rows();
  auto emb = s.rand({rows, d});
  auto pad = s.rand({d});
  for (WindowEnd end : {WindowEnd::kBeforeRow, WindowEnd::kAtRow}) {
    const std::string suffix = end == WindowEnd::kAtRow ? "_at_row" : "";
    s.check("layer/concat_window" + suffix,
            s.weighted([=](Tape<D>& t) { return concat_window(t, emb, layout, 3, pad, end); },
                       {rows, 3 * d}),
            {emb, pad});
  }
  GlobalKernelParams<D> learned{GlobalMode::kLearnedKernel, 2, 3, s.rand({2, 3})};
  s.check("layer/global_learned",
          s.weighted([=](Tape<D>& t) { return global_context_embed(t, emb, layout, 2, learned); },
                     {rows, 2 * d}),
          {emb, learned.kernel_weights});
  GlobalKernelParams<D> average{GlobalMode::kUniformAverage, 0, 1, {}};
  s.check("layer/global_average",
          s.weighted([=](Tape<D>& t) { return global_context_embed(t, emb, layout, 2, average); },
                     {rows, d}),
          {emb});
  for (Activation act : {Activation::kRelu, Activation::kTanh}) {
    ConcatLayerParams<D> p;
    p.k = 3;
    p.w_concat = s.rand({(3 + 2) * d, 8}, -0.5, 0.5);
    p.bias = s.rand({8});
    p.proj = s.rand({8, d});
    p.pad_embedding = pad;
    p.activation = act;
    s.check(std::string("layer/concat_") + std::string(to_string(act)),
            s.weighted([=](Tape<D>& t) { return concat_layer_forward(t, emb, layout, p, &learned); },
                       {rows, d}),
            {emb, p.w_concat, p.bias, p.proj, p.pad_embedding, learned.kernel_weights});
  }
  for (std::optional<std::size_t> window : {std::optional<std::size_t>{}, std::optional<std::size_t>{2}}) {
    AttentionParams<D> p;
    p.n_heads = 2;
    p.w_q = s.rand({d, d}, -0.5, 0.5);
    p.w_k = s.rand({d, d}, -0.5, 0.5);
    p.w_v = s.rand({d, d}, -0.5, 0.5);
    p.w_o = s.rand({d, d}, -0.5, 0.5);
    p.window = window;
    s.check(window ? "layer/attention_window" : "layer/attention",
            s.weighted([=](Tape<D>& t) { return causal_self_attention(t, emb, layout, p, {}, "a"); },
                       {rows, d}),
            {emb, p.w_q, p.w_k, p.w_v, p.w_o});
  }
  for (int flags = 0; flags < 5; ++flags) {
    FeedForwardBlockParams<D> p;
    p.w1 = s.rand({d, 2 * d}, -0.5, 0.5);
    p.w2 = s.rand({2 * d, d}, -0.5, 0.5);
    p.ln_gain = s.rand({d}, 0.5, 1.5);
    p.ln_bias = s.rand({d});
    p.use_residual = flags & 1;
    p.use_layernorm = flags & 2;
    p.dropout = 0.2;
    if (flags == 4) {
      p.use_residual = p.use_layernorm = true;
      p.norm = NormPosition::kPost;
    }
    const LayerContext ctx{Mode::kTrain, s.config().seed, 3};
    std::vector<Tensor<D>> params{emb, p.w1, p.w2};
    if (p.use_layernorm) {
      params.push_back(p.ln_gain);
      params.push_back(p.ln_bias);
    }
    s.check("layer/feed_forward_" + std::to_string(flags),
            s.weighted([=](Tape<D>& t) { return feed_forward_block(t, emb, p, ctx, "ff"); },
                       {rows, d}),
            params);
  }
  const std::size_t V = s.config().vocab_size;
  auto table = s.rand({V, d}, -0.5, 0.5);
  auto h = s.rand({rows, 8});
  auto tie = s.rand({8, d}, -0.5, 0.5);
  s.check("layer/tied_output",
          s.weighted([=](Tape<D>& t) { return tied_output_logits(t, h, table, tie); }, {rows, V}),
          {h, table, tie});
  AdaptiveSoftmaxParams<D> ap;
  ap.cutoffs = {V / 3, 2 * V / 3};
  ap.vocab_size = V;
  ap.clusters = s.rand({2, d}, -0.5, 0.5);
  for (std::size_t i = 0; i < 2; ++i) {
    const std::size_t di = std::max<std::size_t>(1, d >> (2 * (i + 1)));
    ap.tail_proj.push_back(s.rand({d, di}, -0.5, 0.5));
    ap.tail_out.push_back(s.rand({ap.cluster_end(i) - ap.cluster_begin(i), di}, -0.5, 0.5));
  }
  const auto targets = s.ids(rows, V);
  s.check("layer/adaptive_softmax",
          [=](Tape<D>& t) { return adaptive_softmax_nll(t, emb, ap, table, targets); },
          {emb, table, ap.clusters, ap.tail_proj[0], ap.tail_proj[1], ap.tail_out[0],
           ap.tail_out[1]});
}

void models(Suite& s) {
  const auto& cfg = s.config();
  struct Case {
    std::string name;
    ModelConfig model;
  };
  std::vector<Case> cases;
  for (ModelVariant v : {ModelVariant::kNplmOld, ModelVariant::kNplm, ModelVariant::kTransformer,
                         ModelVariant::kTransformerN, ModelVariant::kTransformerC}) {
    ModelConfig c = default_model_config(v);
    c.vocab_size = cfg.vocab_size;
    c.d_emb = cfg.d_emb;
    c.d_hidden = 2 * cfg.d_emb;
    c.d_concat = cfg.d_emb;
    c.n_heads = 2;
    c.k_concat = 4;
    c.n_global_kernels = 2;
    c.l0_window = 3;
    c.init_std = 0.3;
    if (v != ModelVariant::kNplmOld) c.n_layers = cfg.n_layers;
    cases.push_back({"model/" + std::string(to_string(v)), c});
  }
  ModelConfig adaptive = cases[1].model;
  adaptive.adaptive_cutoffs = {cfg.vocab_size / 3, 2 * cfg.vocab_size / 3};
  cases.push_back({"model/nplm_adaptive", adaptive});
  ModelConfig untied = cases[2].model;
  untied.tie_weights = false;
  cases.push_back({"model/transformer_untied", untied});
  ModelConfig average = cases[1].model;
  average.global_mode = GlobalMode::kUniformAverage;
  cases.push_back({"model/nplm_average", average});

  const SequenceLayout layout{1, cfg.seq_len};
  for (const Case& c : cases) {
    auto model = build_model<D>(c.model, cfg.seed);
    const auto ids = s.ids(layout.rows(), cfg.vocab_size);
    const auto targets = s.ids(layout.rows(), cfg.vocab_size);
    const LayerContext ctx{Mode::kTrain, cfg.seed, 1};
    std::vector<Tensor<D>> params;
    for (const auto& p : model.parameters()) params.push_back(p.tensor);
    const Model<D>* m = &model;
    s.check(c.name, [=](Tape<D>& t) { return m->loss(t, ids, targets, layout, ctx); }, params);
  }
}

}  // namespace

std::vector<GradCheckCase> run_gradcheck_suite(
    const GradCheckSuiteConfig& config, const std::function<void(const GradCheckCase&)>& on_case) {
  Suite s(config, on_case);
  primitives(s);
  layers(s);
  models(s);
  return s.take();
}

}  // namespace nlmw
