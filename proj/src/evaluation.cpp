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

#include "nlmw/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include "nlmw/errors.hpp"

namespace nlmw {

std::string_view to_string(EvalUnit unit) {
  return unit == EvalUnit::kWordPpl ? "word_ppl" : "char_bpc";
}

EvalUnit parse_eval_unit(std::string_view text) {
  if (text == "word_ppl") return EvalUnit::kWordPpl;
  if (text == "char_bpc") return EvalUnit::kCharBpc;
  throw ConfigError("unknown eval unit '" + std::string(text) + "' (expected word_ppl or char_bpc)");
}

void validate(const EvalConfig& config) {
  if (config.seq_len == 0) throw ConfigError("eval seq_len must be positive");
  if (config.target_len == 0 || config.target_len > config.seq_len) {
    throw ConfigError("eval target_len must be in [1, seq_len], got " +
                      std::to_string(config.target_len));
  }
  if (config.batch_blocks == 0) throw ConfigError("eval batch_blocks must be positive");
}

template <typename T>
BlockScorer block_scorer(const Model<T>& model) {
  return [&model](std::span<const TokenId> ids, std::span<const TokenId> targets,
                  SequenceLayout layout) { return model.target_logprobs(ids, targets, layout); };
}

template <typename T>
NextTokenScorer next_token_scorer(const Model<T>& model) {
  return [&model](std::span<const TokenId> context) {
    const Tensor<T> scores = forward_logits(model, context);
    const std::size_t V = scores.cols();
    const auto last = scores.data().subspan((context.size() - 1) * V, V);
    return std::vector<double>(last.begin(), last.end());
  };
}

std::vector<EvalBlock> plan_eval_blocks(std::size_t split_length, const EvalConfig& config) {
  validate(config);
  const std::size_t L = config.seq_len;
  if (split_length <= L) {
    throw DataError("evaluation split of " + std::to_string(split_length) +
                    " tokens needs at least " + std::to_string(L + 1) + " for seq_len " +
                    std::to_string(L));
  }
  const std::size_t predictable = split_length - 1;
  std::vector<EvalBlock> blocks{{0, 0}};
  std::size_t start = config.target_len;
  for (; start + L <= predictable; start += config.target_len) {
    blocks.push_back({start, L - config.target_len});
  }
  const std::size_t scored_end = start - config.target_len + L;
  if (scored_end < predictable) {
    const std::size_t rest = predictable - scored_end;
    blocks.push_back({predictable - L, L - rest});
  }
  return blocks;
}

ScoreReport make_score_report(std::span<const double> nll) {
  // Extended precision keeps the mean of n identical terms exact for
  // moderate n.
  long double sum = 0.0L;
  for (double x : nll) sum += x;
  ScoreReport r;
  r.tokens = nll.size();
  r.nll_sum = static_cast<double>(sum);
  if (r.tokens == 0) return r;
  const double mean = static_cast<double>(sum / static_cast<long double>(r.tokens));
  r.ppl = std::exp(mean);
  r.bpc = mean / std::numbers::ln2;
  return r;
}

std::vector<double> score_tokens(const BlockScorer& scorer, std::span<const TokenId> split,
                                 const EvalConfig& config) {
  const std::vector<EvalBlock> blocks = plan_eval_blocks(split.size(), config);
  const std::size_t L = config.seq_len;
  std::vector<double> nll;
  nll.reserve(split.size());
  std::vector<TokenId> inputs, targets;
  for (std::size_t b0 = 0; b0 < blocks.size(); b0 += config.batch_blocks) {
    const std::size_t b1 = std::min(blocks.size(), b0 + config.batch_blocks);
    inputs.clear();
    targets.clear();
    for (std::size_t b = b0; b < b1; ++b) {
      const auto in = split.subspan(blocks[b].start, L);
      const auto tg = split.subspan(blocks[b].start + 1, L);
      inputs.insert(inputs.end(), in.begin(), in.end());
      targets.insert(targets.end(), tg.begin(), tg.end());
    }
    const SequenceLayout layout{b1 - b0, L};
    const std::vector<double> lp = scorer(inputs, targets, layout);
    if (lp.size() != layout.rows()) {
      throw ShapeError("score_corpus: scorer returned " + std::to_string(lp.size()) +
                       " values for " + std::to_string(layout.rows()) + " rows");
    }
    for (std::size_t b = b0; b < b1; ++b) {
      const double* row = lp.data() + (b - b0) * L;
      for (std::size_t r = blocks[b].first_scored; r < L; ++r) nll.push_back(-row[r]);
    }
  }
  return nll;
}

ScoreReport score_corpus(const BlockScorer& scorer, std::span<const TokenId> split,
                         const EvalConfig& config) {
  return make_score_report(score_tokens(scorer, split, config));
}

std::vector<TokenId> predict_targets(const NextTokenScorer& scorer,
                                     std::span<const LambadaItem> items, std::size_t max_context,
                                     std::size_t* truncated, const LogFn& log) {
  if (items.empty()) throw DataError("target-word accuracy needs at least one item");
  if (max_context == 0) throw ConfigError("max_context must be positive");
  std::vector<TokenId> out;
  out.reserve(items.size());
  std::size_t cut = 0;
  for (const LambadaItem& item : items) {
    if (item.context.empty()) {
      throw DataError("record " + std::to_string(item.record) + " has an empty context");
    }
    std::span<const TokenId> ctx = item.context;
    if (ctx.size() > max_context) {
      ++cut;
      if (log) {
        log("truncated context of record " + std::to_string(item.record) + " from " +
            std::to_string(ctx.size()) + " to " + std::to_string(max_context) + " tokens");
      }
      ctx = ctx.last(max_context);
    }
    const std::vector<double> scores = scorer(ctx);
    if (scores.empty()) throw ShapeError("next-token scorer returned no scores");
    std::size_t best = 0;
    for (std::size_t j = 1; j < scores.size(); ++j) {
      if (scores[j] > scores[best]) best = j;
    }
    out.push_back(static_cast<TokenId>(best));
  }
  if (truncated) *truncated = cut;
  return out;
}

std::vector<TargetCategories> categorize_targets(std::span<const LambadaItem> items,
                                                 const TokenFrequencyTable& freq,
                                                 const CategoryThresholds& thresholds) {
  std::vector<TargetCategories> out;
  out.reserve(items.size());
  for (const LambadaItem& item : items) {
    TargetCategories c;
    const auto in_context = static_cast<std::size_t>(
        std::count(item.context.begin(), item.context.end(), item.target));
    c.cf = in_context > thresholds.cf_threshold;
    const std::uint64_t f = item.target_oov ? 0 : freq.count(item.target);
    c.lf = f < thresholds.lf_threshold;
    c.ent = item.entity.value_or(false);
    out.push_back(c);
  }
  return out;
}

CategoryReport category_report(std::span<const LambadaItem> items,
                               std::span<const TokenId> predictions,
                               std::span<const TargetCategories> categories) {
  if (predictions.size() != items.size() || categories.size() != items.size()) {
    throw ShapeError("category_report: " + std::to_string(items.size()) + " items, " +
                     std::to_string(predictions.size()) + " predictions, " +
                     std::to_string(categories.size()) + " categories");
  }
  CategoryReport r;
  auto add = [](BucketStats& b, bool hit) {
    ++b.count;
    if (hit) ++b.correct;
  };
  for (std::size_t i = 0; i < items.size(); ++i) {
    // An out-of-vocabulary target can never be predicted.
    const bool hit = !items[i].target_oov && predictions[i] == items[i].target;
    add(r.all, hit);
    if (categories[i].cf) add(r.cf, hit);
    if (categories[i].lf) add(r.lf, hit);
    if (categories[i].ent) add(r.ent, hit);
  }
  return r;
}

CategoryReport target_word_accuracy(const NextTokenScorer& scorer,
                                    std::span<const LambadaItem> items, std::size_t max_context,
                                    const LogFn& log) {
  std::size_t truncated = 0;
  const auto pred = predict_targets(scorer, items, max_context, &truncated, log);
  CategoryReport r;
  for (std::size_t i = 0; i < items.size(); ++i) {
    ++r.all.count;
    if (!items[i].target_oov && pred[i] == items[i].target) ++r.all.correct;
  }
  r.truncated = truncated;
  return r;
}

CategoryReport analyze_targets(const NextTokenScorer& scorer, std::span<const LambadaItem> items,
                               std::size_t max_context, const TokenFrequencyTable& freq,
                               const CategoryThresholds& thresholds, const LogFn& log) {
  std::size_t truncated = 0;
  const auto pred = predict_targets(scorer, items, max_context, &truncated, log);
  CategoryReport r = category_report(items, pred, categorize_targets(items, freq, thresholds));
  r.truncated = truncated;
  return r;
}

std::string_view to_string(SweepKind kind) {
  return kind == SweepKind::kContextLength ? "context_length" : "l0_window";
}

SweepKind parse_sweep_kind(std::string_view text) {
  if (text == "context_length") return SweepKind::kContextLength;
  if (text == "l0_window") return SweepKind::kL0Window;
  throw ConfigError("unknown sweep kind '" + std::string(text) +
                    "' (expected context_length or l0_window)");
}

SweepCell sweep_cell(const ModelConfig& model, const TrainConfig& train, const EvalConfig& eval,
                     SweepKind kind, std::size_t value, std::uint64_t seed) {
  if (value == 0) throw ConfigError("sweep values must be positive");
  SweepCell cell{model, train, eval};
  cell.train.seed = seed;
  if (kind == SweepKind::kContextLength) {
    const std::size_t tokens = train.batch_size * train.seq_len;
    cell.train.seq_len = value;
    cell.train.batch_size = std::max<std::size_t>(1, (tokens + value / 2) / value);
    cell.eval.seq_len = value;
    cell.eval.target_len = 1;
    cell.eval.batch_blocks = std::max<std::size_t>(eval.batch_blocks, 64);
  } else {
    if (model.variant != ModelVariant::kTransformerC) {
      throw ConfigError("l0_window sweeps need the transformer_c variant, got " +
                        std::string(to_string(model.variant)));
    }
    cell.model.l0_window = value;
  }
  if (!train.checkpoint_dir.empty()) {
    cell.train.checkpoint_dir = train.checkpoint_dir / (std::string(to_string(kind)) + "_" +
                                                        std::to_string(value) + "_seed" +
                                                        std::to_string(seed));
  }
  validate(cell.model);
  validate(cell.eval);
  return cell;
}

std::vector<SweepRow> run_sweep(const ModelConfig& model, const TrainConfig& train,
                                const EvalConfig& eval, const SweepSpec& spec,
                                std::span<const TokenId> train_ids,
                                std::span<const TokenId> valid_ids, const LogFn& log) {
  if (spec.values.empty() || spec.seeds.empty()) {
    throw ConfigError("a sweep needs at least one value and one seed");
  }
  std::vector<SweepRow> rows;
  for (std::size_t value : spec.values) {
    for (std::uint64_t seed : spec.seeds) {
      try {
        const SweepCell cell = sweep_cell(model, train, eval, spec.kind, value, seed);
        Model<float> m = build_model<float>(cell.model, seed);
        TrainState<float> state = init_train_state(m, cell.train);
        const BatchStream stream(std::vector<TokenId>(train_ids.begin(), train_ids.end()),
                                 cell.train.batch_size, cell.train.seq_len);
        train_loop(m, state, cell.train, stream, nullptr, {.log = {}, .on_step = {}});
        const ScoreReport report = score_corpus(m, valid_ids, cell.eval);
        rows.push_back({model.variant, value, seed, report.ppl});
        if (log) {
          std::ostringstream os;
          os << "sweep kind=" << to_string(spec.kind) << " k=" << value << " seed=" << seed
             << " valid_ppl=" << report.ppl;
          log(os.str());
        }
      } catch (const std::exception& e) {
        throw SweepCellError(value, seed, e.what());
      }
    }
  }
  return rows;
}

void write_sweep_tsv(std::ostream& out, std::span<const SweepRow> rows) {
  const auto saved = out.precision(12);
  out << "variant\tk\tseed\tvalid_ppl\n";
  for (const SweepRow& r : rows) {
    out << to_string(r.variant) << '\t' << r.k << '\t' << r.seed << '\t' << r.valid_ppl << '\n';
  }
  out.precision(saved);
}

void write_score_tsv(std::ostream& out, std::string_view split, const ScoreReport& report) {
  const auto saved = out.precision(12);
  out << "split\ttokens\tnll_sum\tppl\tbpc\n";
  out << split << '\t' << report.tokens << '\t' << report.nll_sum << '\t' << report.ppl << '\t'
      << report.bpc << '\n';
  out.precision(saved);
}

void write_category_tsv(std::ostream& out, const CategoryReport& report) {
  const auto saved = out.precision(12);
  out << "bucket\tcount\taccuracy\n";
  const std::pair<const char*, const BucketStats*> rows[] = {
      {"all", &report.all}, {"cf", &report.cf}, {"lf", &report.lf}, {"ent", &report.ent}};
  for (const auto& [name, b] : rows) out << name << '\t' << b->count << '\t' << b->accuracy() << '\n';
  out.precision(saved);
}

template BlockScorer block_scorer<float>(const Model<float>&);
template BlockScorer block_scorer<double>(const Model<double>&);
template NextTokenScorer next_token_scorer<float>(const Model<float>&);
template NextTokenScorer next_token_scorer<double>(const Model<double>&);

}  // namespace nlmw
