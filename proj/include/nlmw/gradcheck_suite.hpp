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
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "nlmw/grad_check.hpp"

namespace nlmw {

struct GradCheckSuiteConfig {
  std::size_t vocab_size = 50;
  std::size_t d_emb = 16;
  std::size_t n_layers = 2;
  std::size_t seq_len = 12;
  std::uint64_t seed = 1;
  double tolerance = 1e-4;
};

struct GradCheckCase {
  std::string name;  // "op/...", "layer/..." or "model/..."
  GradCheckReport report;
  bool passed = false;
};

// Finite-difference checks in double precision over every primitive, every
// layer type and the end-to-end loss of each model variant.
std::vector<GradCheckCase> run_gradcheck_suite(
    const GradCheckSuiteConfig& config = {},
    const std::function<void(const GradCheckCase&)>& on_case = {});

}  // namespace nlmw
