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

#include "nlmw/tape.hpp"

#include <unordered_map>
#include <unordered_set>

namespace nlmw {

template <typename T>
bool Tape<T>::needs_grad(std::initializer_list<const Tensor<T>*> inputs) const {
  if (!recording_) return false;
  for (const Tensor<T>* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

template <typename T>
void Tape<T>::record(const Tensor<T>& output, std::vector<Tensor<T>> inputs, BackwardFn fn) {
  nodes_.push_back(Node{output, std::move(inputs), std::move(fn)});
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got " + shape_to_string(loss.shape()));
  }
  std::unordered_set<const void*> produced;
  produced.reserve(nodes_.size());
  for (Node& node : nodes_) {
    produced.insert(node.output.id());
    node.output.grad_buffer();
    node.output.zero_grad();
  }

  // Leaves collect this pass's contributions in a fresh buffer; the previous
  // value is added back at the end so repeated passes sum exactly.
  std::unordered_map<const void*, std::pair<Tensor<T>, std::vector<T>>> leaves;
  auto stash = [&](Tensor<T> t) {
    if (!t.requires_grad() || produced.count(t.id()) || leaves.count(t.id())) return;
    std::vector<T> previous(t.grad().begin(), t.grad().end());
    t.drop_grad();
    leaves.emplace(t.id(), std::make_pair(t, std::move(previous)));
  };
  for (Node& node : nodes_) {
    for (Tensor<T>& input : node.inputs) stash(input);
  }
  if (!produced.count(loss.id())) stash(loss);

  Tensor<T> seed = loss;
  seed.grad_buffer()[0] += T{1};
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward();

  for (auto& [id, entry] : leaves) {
    auto& [tensor, previous] = entry;
    if (previous.empty()) continue;
    std::span<T> g = tensor.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = previous[i] + g[i];
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace nlmw
