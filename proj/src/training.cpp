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

#include "nlmw/training.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <numbers>
#include <sstream>

#include "nlmw/checkpoint.hpp"

namespace nlmw {

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "sgd";
}

OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "adam") return OptimizerKind::kAdam;
  if (text == "sgd") return OptimizerKind::kSgd;
  throw ConfigError("unknown optimizer '" + std::string(text) + "' (expected adam or sgd)");
}

void validate(const ScheduleConfig& s) {
  if (s.max_steps == 0) throw ConfigError("max_steps: must be positive");
  if (s.warmup_steps >= s.max_steps) throw ConfigError("warmup_steps: must be below max_steps");
  if (!(s.lr_peak >= 0.0) || !(s.lr_min >= 0.0) || s.lr_min > s.lr_peak) {
    throw ConfigError("lr_peak/lr_min: need 0 <= lr_min <= lr_peak");
  }
}

double lr_at(std::uint64_t step, const ScheduleConfig& s) {
  if (step > s.max_steps) {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true)) {
      std::cerr << "warning: step " << step << " is past max_steps " << s.max_steps
                << "; using lr_min\n";
    }
    return s.lr_min;
  }
  if (step < s.warmup_steps) {
    return s.lr_peak * (static_cast<double>(step) / static_cast<double>(s.warmup_steps));
  }
  const double progress = static_cast<double>(step - s.warmup_steps) /
                          static_cast<double>(s.max_steps - s.warmup_steps);
  return s.lr_min + 0.5 * (s.lr_peak - s.lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename T>
OptimizerState<T> make_optimizer_state(const OptimizerConfig& config,
                                       std::span<const Parameter<T>> params) {
  OptimizerState<T> state;
  state.config = config;
  if (config.kind == OptimizerKind::kAdam) {
    for (const auto& p : params) {
      state.m.emplace_back(p.tensor.numel(), T(0));
      state.v.emplace_back(p.tensor.numel(), T(0));
    }
  }
  return state;
}

template <typename T>
double clip_grad_norm(std::span<Parameter<T>> params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (T g : p.tensor.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double coef = max_norm / (norm + 1e-6);
    for (auto& p : params) {
      if (!p.tensor.has_grad()) continue;
      for (T& g : p.tensor.grad_buffer()) g = static_cast<T>(static_cast<double>(g) * coef);
    }
  }
  return norm;
}

namespace {

template <typename T>
void prepare_gradients(std::span<Parameter<T>> params, const OptimizerConfig& config) {
  if (config.clip_norm > 0.0) clip_grad_norm(params, config.clip_norm);
}

template <typename T>
double gradient_at(const Tensor<T>& t, std::size_t i, double weight_decay) {
  const double g = t.has_grad() ? static_cast<double>(t.grad()[i]) : 0.0;
  return weight_decay != 0.0 ? g + weight_decay * static_cast<double>(t.data()[i]) : g;
}

}  // namespace

template <typename T>
void adam_step(std::span<Parameter<T>> params, OptimizerState<T>& state, double lr) {
  const OptimizerConfig& c = state.config;
  if (c.kind != OptimizerKind::kAdam) throw ConfigError("adam_step: optimizer state is not Adam");
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but state for " +
                     std::to_string(state.m.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i].tensor.numel() ||
        state.v[i].size() != params[i].tensor.numel()) {
      throw ShapeError("adam_step: accumulator size mismatch for " + params[i].name);
    }
  }
  prepare_gradients(params, c);
  ++state.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& t = params[i].tensor;
    auto data = t.mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double g = gradient_at(t, j, c.weight_decay);
      const double mj = c.beta1 * static_cast<double>(m[j]) + (1.0 - c.beta1) * g;
      const double vj = c.beta2 * static_cast<double>(v[j]) + (1.0 - c.beta2) * g * g;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = lr * (mj / bc1) / (std::sqrt(vj / bc2) + c.eps);
      data[j] = static_cast<T>(static_cast<double>(data[j]) - update);
    }
  }
}

template <typename T>
void sgd_step(std::span<Parameter<T>> params, OptimizerState<T>& state, double lr) {
  const OptimizerConfig& c = state.config;
  if (c.kind != OptimizerKind::kSgd) throw ConfigError("sgd_step: optimizer state is not SGD");
  prepare_gradients(params, c);
  ++state.step;
  for (auto& p : params) {
    auto data = p.tensor.mutable_data();
    for (std::size_t j = 0; j < data.size(); ++j) {
      data[j] = static_cast<T>(static_cast<double>(data[j]) -
                               lr * gradient_at(p.tensor, j, c.weight_decay));
    }
  }
}

template <typename T>
void optimizer_step(std::span<Parameter<T>> params, OptimizerState<T>& state, double lr) {
  if (state.config.kind == OptimizerKind::kAdam) {
    adam_step(params, state, lr);
  } else {
    sgd_step(params, state, lr);
  }
}

TrainConfig default_train_config(ModelVariant variant) {
  TrainConfig c;
  c.optimizer.clip_norm = is_transformer_family(variant) ? 0.0 : 0.25;
  return c;
}

template <typename T>
TrainState<T> init_train_state(const Model<T>& model, const TrainConfig& config) {
  validate(config.schedule);
  TrainState<T> state;
  state.optimizer = make_optimizer_state<T>(config.optimizer, model.parameters());
  state.seed = config.seed;
  return state;
}

template <typename T>
StepInfo train_step(Model<T>& model, TrainState<T>& state, const TrainConfig& config,
                    const Batch& batch) {
  StepInfo info;
  info.step = state.step + 1;
  info.lr = lr_at(info.step, config.schedule);
  Tape<T> tape;
  const LayerContext ctx{Mode::kTrain, state.seed, info.step};
  const Tensor<T> loss = model.loss(tape, batch.inputs, batch.targets, batch.layout, ctx);
  info.loss = static_cast<double>(loss.item());
  if (!std::isfinite(info.loss)) throw NonFiniteLossError(info.step, info.lr);
  model.zero_grad();
  tape.backward(loss);
  tape.clear();
  optimizer_step(model.parameters(), state.optimizer, info.lr);
  model.zero_grad();
  state.step = info.step;
  state.losses.push_back(info.loss);
  return info;
}

template <typename T>
double validation_loss(const Model<T>& model, const BatchStream& stream) {
  double total = 0.0;
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const Batch b = stream.batch(i);
    for (double lp : model.target_logprobs(b.inputs, b.targets, b.layout)) total -= lp;
    tokens += b.targets.size();
  }
  return tokens ? total / static_cast<double>(tokens) : 0.0;
}

template <typename T>
void train_loop(Model<T>& model, TrainState<T>& state, const TrainConfig& config,
                const BatchStream& train, const BatchStream* valid, const TrainHooks& hooks) {
  validate(config.schedule);
  if (train.size() == 0) throw DataError("training split yields no batches");
  auto log = [&](const std::string& line) {
    if (hooks.log) hooks.log(line);
  };
  if (!config.checkpoint_dir.empty()) std::filesystem::create_directories(config.checkpoint_dir);
  const std::uint64_t max_steps = config.schedule.max_steps;
  const std::size_t log_every = std::max<std::size_t>(1, config.log_every);
  const std::size_t valid_every = std::max<std::size_t>(1, config.valid_every);
  while (state.step < max_steps) {
    const StepInfo info = train_step(model, state, config, train.batch(state.step % train.size()));
    if (info.step == 1 || info.step % log_every == 0 || info.step == max_steps) {
      std::ostringstream os;
      os << "step=" << info.step << " lr=" << info.lr << " loss=" << info.loss;
      log(os.str());
    }
    if (valid && (info.step % valid_every == 0 || info.step == max_steps)) {
      const double v = validation_loss(model, *valid);
      state.validations.emplace_back(info.step, v);
      std::ostringstream os;
      os << "valid step=" << info.step << " loss=" << v << " ppl=" << std::exp(v);
      log(os.str());
      if (v < state.best_valid_loss) {
        state.best_valid_loss = v;
        if (!config.checkpoint_dir.empty()) {
          save_checkpoint(config.checkpoint_dir / "best.ckpt", model, state);
        }
      }
    }
    if (hooks.on_step && !hooks.on_step(info)) break;
  }
  if (!config.checkpoint_dir.empty()) save_checkpoint(config.checkpoint_dir / "last.ckpt", model, state);
}

#define NLMW_INSTANTIATE_TRAINING(T)                                                              \
  template struct OptimizerState<T>;                                                              \
  template OptimizerState<T> make_optimizer_state<T>(const OptimizerConfig&,                      \
                                                     std::span<const Parameter<T>>);              \
  template double clip_grad_norm<T>(std::span<Parameter<T>>, double);                             \
  template void adam_step<T>(std::span<Parameter<T>>, OptimizerState<T>&, double);                \
  template void sgd_step<T>(std::span<Parameter<T>>, OptimizerState<T>&, double);                 \
  template void optimizer_step<T>(std::span<Parameter<T>>, OptimizerState<T>&, double);           \
  template TrainState<T> init_train_state<T>(const Model<T>&, const TrainConfig&);                \
  template StepInfo train_step<T>(Model<T>&, TrainState<T>&, const TrainConfig&, const Batch&);   \
  template double validation_loss<T>(const Model<T>&, const BatchStream&);                        \
  template void train_loop<T>(Model<T>&, TrainState<T>&, const TrainConfig&, const BatchStream&,  \
                              const BatchStream*, const TrainHooks&);

NLMW_INSTANTIATE_TRAINING(float)
NLMW_INSTANTIATE_TRAINING(double)

}  // namespace nlmw
