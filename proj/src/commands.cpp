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

#include "nlmw/commands.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "nlmw/checkpoint.hpp"
#include "nlmw/gradcheck_suite.hpp"

namespace nlmw {
namespace {

struct Loaded {
  Corpus corpus;
  ModelConfig model;
};

Loaded load_data(const RunConfig& cfg, bool need_valid) {
  if (cfg.train_path.empty()) throw ConfigError("train_path: required");
  if (need_valid && cfg.valid_path.empty()) throw ConfigError("valid_path: required");
  Loaded l{load_corpus(cfg.train_path, cfg.valid_path, cfg.test_path, cfg.vocab_mode,
                       cfg.vocab_limit),
           cfg.model};
  l.model.vocab_size = l.corpus.vocab.size();
  validate(l.model);
  return l;
}

std::ofstream open_report(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.output_dir);
  const auto path = cfg.output_dir / name;
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  return f;
}

Model<float> load_model(const RunConfig& cfg, const ModelConfig& model_config) {
  if (cfg.checkpoint.empty()) throw ConfigError("checkpoint: required for this command");
  Model<float> model = build_model<float>(model_config, cfg.train.seed);
  TrainState<float> state = init_train_state(model, cfg.train);
  load_checkpoint(cfg.checkpoint, model, state);
  return model;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  Loaded data = load_data(cfg, true);
  Model<float> model = build_model<float>(data.model, cfg.train.seed);
  TrainConfig train = cfg.train;
  train.checkpoint_dir = cfg.output_dir;
  TrainState<float> state = init_train_state(model, train);
  if (!cfg.checkpoint.empty()) {
    load_checkpoint(cfg.checkpoint, model, state);
    out << "resumed step=" << state.step << " from=" << cfg.checkpoint.string() << "\n";
  }
  std::filesystem::create_directories(cfg.output_dir);
  write_text_file(cfg.output_dir / "config.txt", format_config(cfg));
  write_text_file(cfg.output_dir / "vocab.txt", export_vocab(data.corpus.vocab));
  out << "model variant=" << to_string(data.model.variant)
      << " params=" << count_parameters(model) << " vocab=" << data.model.vocab_size
      << " train_tokens=" << data.corpus.train.ids.size() << "\n";
  const BatchStream train_stream(data.corpus.train.ids, train.batch_size, train.seq_len);
  const BatchStream valid_stream(data.corpus.valid.ids, 1, train.seq_len);
  train_loop(model, state, train, train_stream, &valid_stream,
             {.log = [&](std::string_view line) { out << line << "\n" << std::flush; },
              .on_step = {}});
  out << "done step=" << state.step << " best_valid_loss=" << state.best_valid_loss << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  Loaded data = load_data(cfg, cfg.eval_split == "valid");
  const Model<float> model = load_model(cfg, data.model);
  const CorpusSplit& split = cfg.eval_split == "test" ? data.corpus.test : data.corpus.valid;
  if (split.ids.empty()) throw ConfigError(cfg.eval_split + "_path: required for eval");
  const ScoreReport report = score_corpus(model, split.ids, cfg.eval);
  write_score_tsv(out, cfg.eval_split, report);
  auto f = open_report(cfg, "eval_" + cfg.eval_split + ".tsv");
  write_score_tsv(f, cfg.eval_split, report);
  return 0;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out) {
  if (cfg.sweep.values.empty()) throw ConfigError("sweep_values: required for sweep");
  Loaded data = load_data(cfg, true);
  SweepSpec spec = cfg.sweep;
  if (spec.seeds.empty()) spec.seeds = {cfg.train.seed};
  TrainConfig train = cfg.train;
  train.checkpoint_dir.clear();
  const auto rows = run_sweep(data.model, train, cfg.eval, spec, data.corpus.train.ids,
                              data.corpus.valid.ids,
                              [&](std::string_view line) { out << line << "\n" << std::flush; });
  write_sweep_tsv(out, rows);
  auto f = open_report(cfg, "sweep_" + std::string(to_string(spec.kind)) + ".tsv");
  write_sweep_tsv(f, rows);
  return 0;
}

int cmd_gradcheck(const RunConfig& cfg, std::ostream& out) {
  GradCheckSuiteConfig gc;
  gc.seed = cfg.train.seed;
  std::size_t failed = 0;
  run_gradcheck_suite(gc, [&](const GradCheckCase& c) {
    if (!c.passed) ++failed;
    out << "gradcheck case=" << c.name << " max_rel_err=" << c.report.max_rel_error
        << " elements=" << c.report.elements_checked << " status=" << (c.passed ? "ok" : "FAIL")
        << "\n"
        << std::flush;
  });
  out << "gradcheck failed=" << failed << "\n";
  return failed == 0 ? 0 : 1;
}

int cmd_analyze(const RunConfig& cfg, std::ostream& out) {
  if (cfg.lambada_path.empty()) throw ConfigError("lambada_path: required for analyze");
  Loaded data = load_data(cfg, false);
  const Model<float> model = load_model(cfg, data.model);
  const std::string text = read_text_file(cfg.lambada_path);
  std::optional<std::string> annotations;
  if (!cfg.lambada_annotations.empty()) annotations = read_text_file(cfg.lambada_annotations);
  const LambadaSet set = load_lambada_items(
      text, data.corpus.vocab,
      annotations ? std::optional<std::string_view>(*annotations) : std::nullopt);
  for (const auto& w : set.warnings) out << "warning " << w << "\n";
  const auto freq = token_frequency_table(data.corpus.train.ids, data.model.vocab_size);
  const CategoryReport report =
      analyze_targets(next_token_scorer(model), set.items, cfg.train.seq_len, freq,
                      cfg.thresholds, [&](std::string_view line) { out << line << "\n"; });
  out << "analyze items=" << set.items.size() << " truncated=" << report.truncated << "\n";
  write_category_tsv(out, report);
  auto f = open_report(cfg, "analyze.tsv");
  write_category_tsv(f, report);
  return 0;
}

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

}  // namespace

int run_command(std::string_view command, const RunConfig& config, std::ostream& out) {
  if (command == "train") return cmd_train(config, out);
  if (command == "eval") return cmd_eval(config, out);
  if (command == "sweep") return cmd_sweep(config, out);
  if (command == "gradcheck") return cmd_gradcheck(config, out);
  if (command == "analyze") return cmd_analyze(config, out);
  throw ConfigError("unknown command '" + std::string(command) +
                    "' (expected train, eval, sweep, gradcheck or analyze)");
}

std::string error_record(const std::exception& error) {
  std::ostringstream os;
  os << "error kind=";
  if (const auto* e = dynamic_cast<const ConfigFileError*>(&error)) {
    os << "config line=" << e->line();
    if (!e->key().empty()) os << " key=" << e->key();
  } else if (dynamic_cast<const ConfigError*>(&error)) {
    os << "config";
  } else if (const auto* e = dynamic_cast<const NonFiniteLossError*>(&error)) {
    os << "non_finite_loss step=" << e->step() << " lr=" << e->lr();
  } else if (const auto* e = dynamic_cast<const SweepCellError*>(&error)) {
    os << "sweep k=" << e->k() << " seed=" << e->seed();
  } else if (dynamic_cast<const CheckpointMagicError*>(&error)) {
    os << "checkpoint_magic";
  } else if (dynamic_cast<const CheckpointVersionError*>(&error)) {
    os << "checkpoint_version";
  } else if (dynamic_cast<const CheckpointTruncatedError*>(&error)) {
    os << "checkpoint_truncated";
  } else if (dynamic_cast<const CheckpointUnknownTensorError*>(&error)) {
    os << "checkpoint_unknown_tensor";
  } else if (dynamic_cast<const CheckpointMismatchError*>(&error)) {
    os << "config_mismatch";
  } else if (dynamic_cast<const CheckpointError*>(&error)) {
    os << "checkpoint";
  } else if (dynamic_cast<const DataError*>(&error)) {
    os << "data";
  } else if (dynamic_cast<const ShapeError*>(&error)) {
    os << "shape";
  } else if (dynamic_cast<const IndexError*>(&error)) {
    os << "index";
  } else if (dynamic_cast<const std::filesystem::filesystem_error*>(&error)) {
    os << "io";
  } else {
    os << "internal";
  }
  os << " message=" << quote(error.what());
  return os.str();
}

}  // namespace nlmw
