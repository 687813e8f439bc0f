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
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nlmw/data.hpp"
#include "nlmw/model.hpp"
#include "nlmw/training.hpp"

namespace nlmw {

enum class EvalUnit { kWordPpl, kCharBpc };

std::string_view to_string(EvalUnit unit);
EvalUnit parse_eval_unit(std::string_view text);

struct EvalConfig {
  std::size_t seq_len = 512;
  std::size_t target_len = 128;  // scored suffix of every block after the first
  EvalUnit unit = EvalUnit::kWordPpl;
  std::size_t batch_blocks = 8;  // blocks per forward pass
};

void validate(const EvalConfig& config);

struct ScoreReport {
  std::size_t tokens = 0;
  double nll_sum = 0.0;  // natural log
  double ppl = 1.0;
  double bpc = 0.0;
};

// Eval-mode log P(targets[r] | ids of the same sequence up to r), per row.
using BlockScorer = std::function<std::vector<double>(
    std::span<const TokenId> ids, std::span<const TokenId> targets, SequenceLayout layout)>;

// Scores over the vocabulary for the token following `context`.
using NextTokenScorer = std::function<std::vector<double>(std::span<const TokenId> context)>;

template <typename T>
BlockScorer block_scorer(const Model<T>& model);
template <typename T>
NextTokenScorer next_token_scorer(const Model<T>& model);

/// One evaluation block: inputs split[start, start + seq_len) predicting
/// split[start + 1, start + seq_len + 1); rows >= first_scored are counted.
struct EvalBlock {
  std::size_t start = 0;
  std::size_t first_scored = 0;
};

// Throws DataError unless split_length > seq_len.
std::vector<EvalBlock> plan_eval_blocks(std::size_t split_length, const EvalConfig& config);

// Every token after the first is scored exactly once. The first block scores
// all of its rows, later blocks slide by target_len and score their last
// target_len rows, and a final block ending at the last token scores the rest.
ScoreReport score_corpus(const BlockScorer& scorer, std::span<const TokenId> split,
                         const EvalConfig& config);
// Per-token NLL under the same protocol; entry i scores split[i + 1].
std::vector<double> score_tokens(const BlockScorer& scorer, std::span<const TokenId> split,
                                 const EvalConfig& config);
ScoreReport make_score_report(std::span<const double> nll);

template <typename T>
ScoreReport score_corpus(const Model<T>& model, std::span<const TokenId> split,
                         const EvalConfig& config) {
  return score_corpus(block_scorer(model), split, config);
}

struct BucketStats {
  std::size_t count = 0;
  std::size_t correct = 0;
  double accuracy() const { return count ? static_cast<double>(correct) / count : 0.0; }
};

struct CategoryReport {
  BucketStats all, cf, lf, ent;
  std::size_t truncated = 0;  // contexts cut to the model's sequence length
};

struct TargetCategories {
  bool cf = false;
  bool lf = false;
  bool ent = false;
};

struct CategoryThresholds {
  std::size_t cf_threshold = 2;     // CF: more than this many occurrences in the context
  std::uint64_t lf_threshold = 1500;  // LF: training frequency below this
};

using LogFn = std::function<void(std::string_view)>;

// Argmax next-token prediction per item with ties going to the lowest id.
// Contexts longer than max_context keep their most recent tokens.
std::vector<TokenId> predict_targets(const NextTokenScorer& scorer,
                                     std::span<const LambadaItem> items, std::size_t max_context,
                                     std::size_t* truncated = nullptr, const LogFn& log = {});

// Pure function of the items and the training frequencies. Out-of-vocabulary
// targets count as training frequency zero.
std::vector<TargetCategories> categorize_targets(std::span<const LambadaItem> items,
                                                 const TokenFrequencyTable& freq,
                                                 const CategoryThresholds& thresholds = {});

CategoryReport category_report(std::span<const LambadaItem> items,
                               std::span<const TokenId> predictions,
                               std::span<const TargetCategories> categories);

// Only the `all` bucket is filled. Throws DataError on an empty item list.
CategoryReport target_word_accuracy(const NextTokenScorer& scorer,
                                    std::span<const LambadaItem> items, std::size_t max_context,
                                    const LogFn& log = {});

CategoryReport analyze_targets(const NextTokenScorer& scorer, std::span<const LambadaItem> items,
                               std::size_t max_context, const TokenFrequencyTable& freq,
                               const CategoryThresholds& thresholds = {}, const LogFn& log = {});

enum class SweepKind { kContextLength, kL0Window };

std::string_view to_string(SweepKind kind);
SweepKind parse_sweep_kind(std::string_view text);

struct SweepSpec {
  SweepKind kind = SweepKind::kContextLength;
  std::vector<std::size_t> values;
  std::vector<std::uint64_t> seeds;
};

struct SweepRow {
  ModelVariant variant = ModelVariant::kNplm;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  double valid_ppl = 0.0;
};

class SweepCellError : public std::runtime_error {
 public:
  SweepCellError(std::size_t k, std::uint64_t seed, const std::string& what)
      : std::runtime_error("sweep cell k=" + std::to_string(k) + " seed=" + std::to_string(seed) +
                           ": " + what),
        k_(k),
        seed_(seed) {}
  std::size_t k() const { return k_; }
  std::uint64_t seed() const { return seed_; }

 private:
  std::size_t k_;
  std::uint64_t seed_;
};

struct SweepCell {
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
};

// Configuration of one (value, seed) cell. Context-length cells train and
// evaluate with every prediction limited to the k most recent tokens, keeping
// tokens per step fixed; l0-window cells set the layer-0 window.
SweepCell sweep_cell(const ModelConfig& model, const TrainConfig& train, const EvalConfig& eval,
                     SweepKind kind, std::size_t value, std::uint64_t seed);

// Trains one model from scratch per (value, seed); rows come out in
// value-major order.
std::vector<SweepRow> run_sweep(const ModelConfig& model, const TrainConfig& train,
                                const EvalConfig& eval, const SweepSpec& spec,
                                std::span<const TokenId> train_ids,
                                std::span<const TokenId> valid_ids, const LogFn& log = {});

void write_sweep_tsv(std::ostream& out, std::span<const SweepRow> rows);
void write_score_tsv(std::ostream& out, std::string_view split, const ScoreReport& report);
void write_category_tsv(std::ostream& out, const CategoryReport& report);

extern template BlockScorer block_scorer<float>(const Model<float>&);
extern template BlockScorer block_scorer<double>(const Model<double>&);
extern template NextTokenScorer next_token_scorer<float>(const Model<float>&);
extern template NextTokenScorer next_token_scorer<double>(const Model<double>&);

}  // namespace nlmw
