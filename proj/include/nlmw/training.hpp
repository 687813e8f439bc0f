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
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "nlmw/data.hpp"
#include "nlmw/model.hpp"

namespace nlmw {

enum class OptimizerKind { kAdam, kSgd };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view text);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // L2 term added to the gradient
  double clip_norm = 0.0;     // global-norm clipping threshold; 0 disables

  bool operator==(const OptimizerConfig&) const = default;
};

struct ScheduleConfig {
  std::uint64_t warmup_steps = 4000;
  std::uint64_t max_steps = 100000;
  double lr_peak = 2.5e-4;
  double lr_min = 0.0;

  bool operator==(const ScheduleConfig&) const = default;
};

void validate(const ScheduleConfig& schedule);

// Linear warmup from 0 to lr_peak, then one cosine cycle down to lr_min at
// max_steps. Steps past max_steps return lr_min (a warning is printed once).
double lr_at(std::uint64_t step, const ScheduleConfig& schedule);

template <typename T>
struct OptimizerState {
  OptimizerConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<T>> m;  // Adam first moments, one per parameter
  std::vector<std::vector<T>> v;  // Adam second moments
};

template <typename T>
OptimizerState<T> make_optimizer_state(const OptimizerConfig& config,
                                       std::span<const Parameter<T>> params);

// Scales all gradients so their global L2 norm is at most `max_norm`;
// returns the norm before clipping.
template <typename T>
double clip_grad_norm(std::span<Parameter<T>> params, double max_norm);

// Bias-corrected Adam. Clipping (config.clip_norm > 0) and weight decay are
// applied to the gradients first. Missing gradients count as zero.
template <typename T>
void adam_step(std::span<Parameter<T>> params, OptimizerState<T>& state, double lr);

// theta <- theta - lr * g, with the same clipping and weight decay.
template <typename T>
void sgd_step(std::span<Parameter<T>> params, OptimizerState<T>& state, double lr);

template <typename T>
void optimizer_step(std::span<Parameter<T>> params, OptimizerState<T>& state, double lr);

struct TrainConfig {
  OptimizerConfig optimizer;
  ScheduleConfig schedule;
  std::size_t batch_size = 16;
  std::size_t seq_len = 64;
  std::uint64_t seed = 1;
  std::size_t valid_every = 500;
  std::size_t log_every = 100;
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints
};

// Gradient clipping at 0.25 for the NPLM family, off for Transformers.
TrainConfig default_train_config(ModelVariant variant);

template <typename T>
struct TrainState {
  OptimizerState<T> optimizer;
  std::uint64_t step = 0;  // completed optimizer steps
  std::uint64_t seed = 0;
  std::vector<double> losses;
  double best_valid_loss = std::numeric_limits<double>::infinity();
  std::vector<std::pair<std::uint64_t, double>> validations;  // (step, mean NLL)
};

template <typename T>
TrainState<T> init_train_state(const Model<T>& model, const TrainConfig& config);

struct StepInfo {
  std::uint64_t step = 0;  // 1-based index of the step just taken
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainHooks {
  std::function<void(std::string_view)> log;
  // Return false to stop training after this step.
  std::function<bool(const StepInfo&)> on_step;
};

// One optimizer step on `batch` with dropout keyed by (seed, step). Step
// n (1-based) uses lr_at(n). Throws NonFiniteLossError before touching the
// parameters if the loss is NaN or infinite.
template <typename T>
StepInfo train_step(Model<T>& model, TrainState<T>& state, const TrainConfig& config,
                    const Batch& batch);

// Mean eval-mode NLL over every batch of `stream`.
template <typename T>
double validation_loss(const Model<T>& model, const BatchStream& stream);

/// Runs from state.step to schedule.max_steps.
///
/// Step n draws batch (n - 1) mod train.size(). Validation runs every
/// valid_every steps and after the last one; improvements are saved as
/// best.ckpt and the final state as last.ckpt when checkpoint_dir is set.
template <typename T>
void train_loop(Model<T>& model, TrainState<T>& state, const TrainConfig& config,
                const BatchStream& train, const BatchStream* valid, const TrainHooks& hooks = {});

extern template struct OptimizerState<float>;
extern template struct OptimizerState<double>;

}  // namespace nlmw
