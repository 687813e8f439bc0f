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
#include <functional>
#include <initializer_list>
#include <vector>

#include "nlmw/tensor.hpp"

namespace nlmw {

/// Ordered record of differentiable operations.
///
/// Nodes are appended in execution order, so replaying their backward rules
/// in reverse visits every consumer before its producer. Intermediate
/// gradients are rebuilt on each backward() call; leaf gradients accumulate.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }

  // True when an op consuming `inputs` has to be recorded.
  bool needs_grad(std::initializer_list<const Tensor<T>*> inputs) const;

  void record(const Tensor<T>& output, std::vector<Tensor<T>> inputs, BackwardFn fn);

  // Seeds d(loss)/d(loss) = 1 and replays the tape. Gradients of leaves
  // (tensors not produced on this tape) are added to whatever they held.
  void backward(const Tensor<T>& loss);

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> output;
    std::vector<Tensor<T>> inputs;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  bool recording_ = true;
};

// Suspends recording for the guard's lifetime.
template <typename T>
class NoRecordGuard {
 public:
  explicit NoRecordGuard(Tape<T>& tape) : tape_(tape), previous_(tape.recording()) {
    tape_.set_recording(false);
  }
  ~NoRecordGuard() { tape_.set_recording(previous_); }
  NoRecordGuard(const NoRecordGuard&) = delete;
  NoRecordGuard& operator=(const NoRecordGuard&) = delete;

 private:
  Tape<T>& tape_;
  bool previous_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace nlmw
