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

#include <exception>
#include <iosfwd>
#include <string>
#include <string_view>

#include "nlmw/run_config.hpp"

namespace nlmw {

// train | eval | sweep | gradcheck | analyze. Logs and reports go to `out`;
// report tables are also written under config.output_dir. Returns the exit
// status; failures surface as exceptions.
int run_command(std::string_view command, const RunConfig& config, std::ostream& out);

// One-line "error kind=<kind> [field=value ...] message=\"...\"" record.
std::string error_record(const std::exception& error);

}  // namespace nlmw
