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
#include <filesystem>

#include "nlmw/training.hpp"

namespace nlmw {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::uint64_t config_hash = 0;
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
  std::uint64_t optimizer_step = 0;
  std::size_t vocab_size = 0;
  double best_valid_loss = 0.0;
};

/// Binary layout: "NLMW", u32 version, u32-length-prefixed "key=value"
/// metadata lines, then tensor records (u32 name length, name, u32 rank,
/// u64 dims, float32 payload), all little-endian. Adam moments are stored
/// as "<param>.adam.m" and "<param>.adam.v".
template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Model<T>& model,
                     const TrainState<T>& state);

// Parses and verifies the whole file before writing into `model` or
// `state`; on any error both are left untouched.
template <typename T>
void load_checkpoint(const std::filesystem::path& path, Model<T>& model, TrainState<T>& state);

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);

}  // namespace nlmw
