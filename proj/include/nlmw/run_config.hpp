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
#include <string>
#include <string_view>
#include <vector>

#include "nlmw/data.hpp"
#include "nlmw/errors.hpp"
#include "nlmw/evaluation.hpp"
#include "nlmw/model.hpp"
#include "nlmw/training.hpp"

namespace nlmw {

struct RunConfig {
  ModelConfig model;  // vocab_size is filled in from the training data
  TrainConfig train;
  EvalConfig eval;
  std::filesystem::path train_path, valid_path, test_path;
  VocabMode vocab_mode = VocabMode::kWord;
  VocabLimit vocab_limit;
  std::filesystem::path output_dir = "runs/default";
  std::filesystem::path checkpoint;  // eval/analyze input, or a train resume point
  std::string eval_split = "valid";
  std::filesystem::path lambada_path, lambada_annotations;
  CategoryThresholds thresholds;
  SweepSpec sweep;
};

/// A config problem tied to a file line. Line 0 means a command-line
/// override.
class ConfigFileError : public ConfigError {
 public:
  ConfigFileError(std::size_t line, std::string key, const std::string& message)
      : ConfigError((line ? "line " + std::to_string(line) : std::string("override")) + ": " +
                    (key.empty() ? std::string() : key + ": ") + message),
        line_(line),
        key_(std::move(key)) {}
  std::size_t line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  std::size_t line_;
  std::string key_;
};

// Every recognized key, in canonical order.
std::vector<std::string> config_keys();

// Flat "key = value" lines with "#" comments. Defaults come from the
// variant; overrides ("key=value") win over the file and are applied before
// validation.
RunConfig parse_config_text(std::string_view text, std::span<const std::string> overrides = {});
RunConfig parse_config(const std::filesystem::path& path,
                       std::span<const std::string> overrides = {});

// All keys as "key = value" lines; parse_config_text(format_config(c)) == c.
std::string format_config(const RunConfig& config);

// Keys whose values differ, in canonical order.
std::vector<std::string> config_diff(const RunConfig& a, const RunConfig& b);

}  // namespace nlmw
