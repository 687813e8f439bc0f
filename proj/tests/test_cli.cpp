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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "nlmw/checkpoint.hpp"
#include "nlmw/commands.hpp"

namespace nlmw {
namespace {

const std::filesystem::path kSource = NLMW_SOURCE_DIR;

template <typename Fn>
ConfigFileError expect_file_error(Fn fn) {
  try {
    fn();
  } catch (const ConfigFileError& e) {
    return e;
  }
  ADD_FAILURE() << "expected ConfigFileError";
  return ConfigFileError(0, "", "");
}

TEST(ParseConfigTest, MinimalFileGetsVariantDefaults) {
  const RunConfig t = parse_config_text("variant = transformer\nd_emb = 32\ntrain_path = a.txt\n");
  EXPECT_EQ(t.model.variant, ModelVariant::kTransformer);
  EXPECT_EQ(t.model.d_emb, 32u);
  EXPECT_EQ(t.model.dropout, 0.1);
  EXPECT_EQ(t.train.optimizer.clip_norm, 0.0);
  EXPECT_EQ(t.train_path, "a.txt");
  const RunConfig n = parse_config_text("# comment only\n\nvariant = nplm   # trailing\n");
  EXPECT_EQ(n.model.dropout, 0.2);
  EXPECT_EQ(n.train.optimizer.clip_norm, 0.25);
  EXPECT_EQ(n.eval.seq_len, 512u);
  EXPECT_EQ(n.thresholds.cf_threshold, 2u);
}

TEST(ParseConfigTest, TypeErrorNamesLine) {
  const auto e = expect_file_error(
      [] { parse_config_text("variant = transformer\nn_heads = seven\n"); });
  EXPECT_EQ(e.line(), 2u);
  EXPECT_EQ(e.key(), "n_heads");
  EXPECT_NE(std::string(e.what()).find("seven"), std::string::npos);
}

TEST(ParseConfigTest, DuplicateUnknownAndSyntaxErrors) {
  auto e = expect_file_error([] { parse_config_text("dropout = 0.1\nseed = 2\ndropout = 0.3\n"); });
  EXPECT_EQ(e.line(), 3u);
  EXPECT_EQ(e.key(), "dropout");
  EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos);
  e = expect_file_error([] { parse_config_text("seed = 1\nlearning_rate = 3\n"); });
  EXPECT_EQ(e.line(), 2u);
  EXPECT_EQ(e.key(), "learning_rate");
  e = expect_file_error([] { parse_config_text("seed 1\n"); });
  EXPECT_EQ(e.line(), 1u);
  e = expect_file_error([] { parse_config_text("use_residual = maybe\n"); });
  EXPECT_EQ(e.key(), "use_residual");
  e = expect_file_error([] { parse_config_text("variant = rnn\n"); });
  EXPECT_EQ(e.key(), "variant");
  e = expect_file_error([] { parse_config_text("lr_peak = 1e-3x\n"); });
  EXPECT_EQ(e.key(), "lr_peak");
}

TEST(ParseConfigTest, VariantConstraintNamesLine) {
  auto e = expect_file_error(
      [] { parse_config_text("variant = nplm_old\nd_emb = 8\nn_layers = 3\n"); });
  EXPECT_EQ(e.line(), 3u);
  EXPECT_EQ(e.key(), "n_layers");
  e = expect_file_error([] { parse_config_text("variant = transformer\nd_emb = 10\nn_heads = 4\n"); });
  EXPECT_EQ(e.key(), "n_heads");
  EXPECT_EQ(e.line(), 3u);
  e = expect_file_error([] { parse_config_text("max_steps = 10\nwarmup_steps = 10\n"); });
  EXPECT_EQ(e.key(), "warmup_steps");
  EXPECT_EQ(e.line(), 2u);
  e = expect_file_error([] { parse_config_text("eval_seq_len = 8\neval_target_len = 9\n"); });
  EXPECT_EQ(e.key(), "eval_target_len");
}

TEST(ParseConfigTest, OverridesWinAndApplyBeforeValidation) {
  const std::string text = "variant = nplm\nmax_steps = 10\nwarmup_steps = 10\n";
  EXPECT_THROW(parse_config_text(text), ConfigFileError);
  const std::vector<std::string> fix{"warmup_steps=2", "seed = 9"};
  const RunConfig c = parse_config_text(text, fix);
  EXPECT_EQ(c.train.schedule.warmup_steps, 2u);
  EXPECT_EQ(c.train.seed, 9u);
  // A variant override also switches the defaults.
  const std::vector<std::string> v{"variant=transformer"};
  EXPECT_EQ(parse_config_text("max_steps = 10\nwarmup_steps = 1\n", v).model.dropout, 0.1);
  const std::vector<std::string> bad{"d_emb=x"};
  const auto e = expect_file_error([&] { parse_config_text("", bad); });
  EXPECT_EQ(e.line(), 0u);
  const std::vector<std::string> twice{"seed=1", "seed=2"};
  EXPECT_THROW(parse_config_text("", twice), ConfigFileError);
}

TEST(ParseConfigTest, FormatRoundTrip) {
  RunConfig c = parse_config_text(
      "variant = transformer_c\nl0_window = 3\nadaptive_cutoffs = 100, 2000\n"
      "sweep_values = 1,2,3\nsweep_seeds = 4,5\nvocab_top_k = 500\nlr_peak = 0.00025\n");
  EXPECT_EQ(c.model.adaptive_cutoffs, (std::vector<std::size_t>{100, 2000}));
  EXPECT_EQ(c.sweep.seeds, (std::vector<std::uint64_t>{4, 5}));
  const std::string text = format_config(c);
  const RunConfig again = parse_config_text(text);
  EXPECT_EQ(format_config(again), text);
  EXPECT_EQ(again.model, c.model);
  EXPECT_TRUE(config_diff(c, again).empty());
  RunConfig changed = again;
  changed.model.dropout = 0.5;
  changed.train.seed = 3;
  EXPECT_EQ(config_diff(c, changed), (std::vector<std::string>{"dropout", "seed"}));
}

TEST(ParseConfigTest, ShippedPresetsParse) {
  for (const auto& entry : std::filesystem::directory_iterator(kSource / "configs")) {
    EXPECT_NO_THROW(parse_config(entry.path())) << entry.path();
  }
  EXPECT_THROW(parse_config(kSource / "configs" / "missing.cfg"), ConfigError);
}

TEST(ErrorRecordTest, OneLineWithKind) {
  EXPECT_EQ(error_record(ConfigFileError(4, "dropout", "bad")),
            "error kind=config line=4 key=dropout message=\"line 4: dropout: bad\"");
  EXPECT_EQ(error_record(NonFiniteLossError(7, 0.5)).rfind("error kind=non_finite_loss step=7", 0),
            0u);
  EXPECT_EQ(error_record(CheckpointMismatchError("x\ny")),
            "error kind=config_mismatch message=\"x\\ny\"");
  EXPECT_EQ(error_record(DataError("q\"")), "error kind=data message=\"q\\\"\"");
}

class CommandTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("nlmw_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  RunConfig tiny(const std::string& variant, std::vector<std::string> extra = {}) {
    const auto data = kSource / "data" / "tiny";
    std::vector<std::string> o{"variant=" + variant,
                               "train_path=" + (data / "train.txt").string(),
                               "valid_path=" + (data / "valid.txt").string(),
                               "test_path=" + (data / "test.txt").string(),
                               "output_dir=" + dir_.string(),
                               "n_layers=2", "d_emb=16", "d_hidden=32", "d_concat=16",
                               "n_heads=2", "k_concat=3", "l0_window=2",
                               "max_steps=6", "warmup_steps=2", "lr_peak=0.003",
                               "batch_size=2", "seq_len=16", "valid_every=3", "log_every=2",
                               "eval_seq_len=32", "eval_target_len=8"};
    for (const std::string& e : extra) {
      const std::string key = e.substr(0, e.find('=') + 1);
      std::erase_if(o, [&](const std::string& x) { return x.rfind(key, 0) == 0; });
      o.push_back(e);
    }
    return parse_config_text("", o);
  }
  std::filesystem::path dir_;
};

TEST_F(CommandTest, TrainThenEval) {
  const auto train_file = kSource / "data" / "tiny" / "train.txt";
  const std::string before = read_text_file(train_file);
  std::ostringstream log;
  EXPECT_EQ(run_command("train", tiny("nplm"), log), 0);
  const std::string text = log.str();
  const std::regex step_line(R"(step=\d+ lr=[0-9.e+-]+ loss=[0-9.e+-]+)");
  std::size_t steps = 0;
  std::istringstream lines(text);
  for (std::string l; std::getline(lines, l);) {
    if (l.rfind("step=", 0) == 0) {
      EXPECT_TRUE(std::regex_match(l, step_line)) << l;
      ++steps;
    }
  }
  EXPECT_EQ(steps, 4u);  // steps 1, 2, 4, 6
  EXPECT_NE(text.find("valid step=3 "), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir_ / "last.ckpt"));
  EXPECT_TRUE(std::filesystem::exists(dir_ / "best.ckpt"));
  EXPECT_EQ(read_checkpoint_meta(dir_ / "last.ckpt").step, 6u);
  EXPECT_EQ(read_text_file(train_file), before);

  std::ostringstream out;
  EXPECT_EQ(run_command("eval", tiny("nplm", {"checkpoint=" + (dir_ / "last.ckpt").string()}), out),
            0);
  EXPECT_EQ(out.str().rfind("split\ttokens\tnll_sum\tppl\tbpc\nvalid\t", 0), 0u);
  EXPECT_TRUE(std::filesystem::exists(dir_ / "eval_valid.tsv"));

  std::ostringstream ignored;
  const RunConfig smaller = tiny("nplm", {"checkpoint=" + (dir_ / "last.ckpt").string(),
                                          "vocab_top_k=20"});
  EXPECT_THROW(run_command("eval", smaller, ignored), CheckpointMismatchError);
  EXPECT_THROW(run_command("eval", tiny("nplm"), ignored), ConfigError);
}

TEST_F(CommandTest, ResumeContinuesFromCheckpoint) {
  std::ostringstream log;
  run_command("train", tiny("transformer", {"max_steps=4"}), log);
  std::ostringstream resumed;
  run_command("train", tiny("transformer", {"checkpoint=" + (dir_ / "last.ckpt").string()}),
              resumed);
  EXPECT_NE(resumed.str().find("resumed step=4"), std::string::npos);
  EXPECT_EQ(resumed.str().find("step=1 "), std::string::npos);
  EXPECT_EQ(read_checkpoint_meta(dir_ / "last.ckpt").step, 6u);
}

TEST_F(CommandTest, L0WindowSweepRowCount) {
  std::ostringstream out;
  const RunConfig c = tiny("transformer_c", {"sweep_kind=l0_window",
                                             "sweep_values=1,2,3,4,5,8,15", "sweep_seeds=1,2",
                                             "max_steps=2", "warmup_steps=1"});
  EXPECT_EQ(run_command("sweep", c, out), 0);
  std::ifstream f(dir_ / "sweep_l0_window.tsv");
  std::size_t rows = 0;
  for (std::string l; std::getline(f, l);) ++rows;
  EXPECT_EQ(rows, 1u + 7 * 2);
}

TEST_F(CommandTest, AnalyzeReportsBuckets) {
  std::ostringstream log;
  run_command("train", tiny("nplm"), log);
  const auto data = kSource / "data" / "tiny";
  std::ostringstream out;
  const RunConfig c = tiny("nplm", {"checkpoint=" + (dir_ / "last.ckpt").string(),
                                    "lambada_path=" + (data / "lambada.txt").string(),
                                    "lambada_annotations=" +
                                        (data / "lambada_entities.txt").string()});
  EXPECT_EQ(run_command("analyze", c, out), 0);
  EXPECT_NE(out.str().find("bucket\tcount\taccuracy\nall\t60\t"), std::string::npos);
  EXPECT_NE(out.str().find("truncated="), std::string::npos);
}

TEST_F(CommandTest, UnknownCommand) {
  std::ostringstream out;
  EXPECT_THROW(run_command("serve", tiny("nplm"), out), ConfigError);
}

}  // namespace
}  // namespace nlmw
