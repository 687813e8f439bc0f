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
#include <stdexcept>
#include <string>

namespace nlmw {

// Tensor shapes disagree with an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A token id or row index is outside its valid range.
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Invalid hyperparameter or model/run configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Corpus, annotation or split contents cannot satisfy a request.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A function expected to be deterministic returned different values.
class DeterminismError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a NaN or infinite loss.
class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(std::uint64_t step, double lr)
      : std::runtime_error("non-finite loss at step " + std::to_string(step) +
                           " (lr=" + std::to_string(lr) + ")"),
        step_(step),
        lr_(lr) {}
  std::uint64_t step() const { return step_; }
  double lr() const { return lr_; }

 private:
  std::uint64_t step_;
  double lr_;
};

// Base of every checkpoint load failure.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointMagicError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class CheckpointTruncatedError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class CheckpointUnknownTensorError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

// Config hash, vocabulary size, tensor shape or a missing tensor disagree
// with the model being restored.
class CheckpointMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

}  // namespace nlmw
