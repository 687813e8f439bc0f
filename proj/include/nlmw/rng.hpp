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
#include <string_view>

namespace nlmw {

std::uint64_t fnv1a64(std::string_view text);
std::uint64_t splitmix64(std::uint64_t x);

/// Counter-based generator: draw i of a stream is a pure function of
/// (seed, step, name, i). Dropout masks and parameter initialization both
/// draw from streams keyed this way, so any run can be replayed from its seed.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t step, std::string_view name);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  // Random-access draws; these do not advance the stream.
  std::uint64_t u64_at(std::uint64_t index) const;
  double uniform_at(std::uint64_t index) const;  // [0, 1)

  std::uint64_t next_u64() { return u64_at(counter_++); }
  double uniform() { return uniform_at(counter_++); }
  // Standard normal via Box-Muller; consumes two draws.
  double normal();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace nlmw
