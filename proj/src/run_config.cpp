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

#include "nlmw/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <optional>

namespace nlmw {
namespace {

struct KeySpec {
  const char* name;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

// Thrown by value parsers; the caller adds line and key.
struct BadValue {
  std::string message;
};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64(std::string_view v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size()) {
    throw BadValue{"expected an unsigned integer, got '" + std::string(v) + "'"};
  }
  return out;
}

std::size_t parse_size(std::string_view v) { return static_cast<std::size_t>(parse_u64(v)); }

double parse_double(std::string_view v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size()) {
    throw BadValue{"expected a number, got '" + std::string(v) + "'"};
  }
  return out;
}

bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw BadValue{"expected true or false, got '" + std::string(v) + "'"};
}

template <typename F>
auto parse_enum(std::string_view v, F parse) {
  try {
    return parse(v);
  } catch (const ConfigError& e) {
    throw BadValue{e.what()};
  }
}

template <typename U>
std::vector<U> parse_list(std::string_view v, U (*item)(std::string_view)) {
  std::vector<U> out;
  if (v.empty() || v == "none") return out;
  while (true) {
    const auto comma = v.find(',');
    out.push_back(item(trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

std::optional<std::size_t> parse_optional_size(std::string_view v) {
  if (v == "none") return std::nullopt;
  return parse_size(v);
}

std::string fmt(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string fmt(bool b) { return b ? "true" : "false"; }

template <typename U>
std::string fmt_list(const std::vector<U>& xs) {
  if (xs.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(xs[i]);
  }
  return out;
}

std::string fmt_optional(const std::optional<std::size_t>& x) {
  return x ? std::to_string(*x) : "none";
}

#define NLMW_SIZE_KEY(key, field)                                              \
  KeySpec {                                                                    \
    key, [](RunConfig& c, std::string_view v) { c.field = parse_size(v); },    \
        [](const RunConfig& c) { return std::to_string(c.field); }             \
  }
#define NLMW_U64_KEY(key, field)                                               \
  KeySpec {                                                                    \
    key, [](RunConfig& c, std::string_view v) { c.field = parse_u64(v); },     \
        [](const RunConfig& c) { return std::to_string(c.field); }             \
  }
#define NLMW_DOUBLE_KEY(key, field)                                            \
  KeySpec {                                                                    \
    key, [](RunConfig& c, std::string_view v) { c.field = parse_double(v); },  \
        [](const RunConfig& c) { return fmt(c.field); }                        \
  }
#define NLMW_BOOL_KEY(key, field)                                              \
  KeySpec {                                                                    \
    key, [](RunConfig& c, std::string_view v) { c.field = parse_bool(v); },    \
        [](const RunConfig& c) { return fmt(c.field); }                        \
  }
#define NLMW_PATH_KEY(key, field)                                              \
  KeySpec {                                                                    \
    key, [](RunConfig& c, std::string_view v) { c.field = std::string(v); },   \
        [](const RunConfig& c) { return c.field.string(); }                    \
  }
#define NLMW_ENUM_KEY(key, field, parser)                                              \
  KeySpec {                                                                            \
    key, [](RunConfig& c, std::string_view v) { c.field = parse_enum(v, parser); },    \
        [](const RunConfig& c) { return std::string(to_string(c.field)); }             \
  }

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      NLMW_ENUM_KEY("variant", model.variant, parse_variant),
      NLMW_SIZE_KEY("n_layers", model.n_layers),
      NLMW_SIZE_KEY("d_emb", model.d_emb),
      NLMW_SIZE_KEY("d_hidden", model.d_hidden),
      NLMW_SIZE_KEY("d_concat", model.d_concat),
      NLMW_SIZE_KEY("n_heads", model.n_heads),
      NLMW_SIZE_KEY("k_concat", model.k_concat),
      NLMW_SIZE_KEY("n_global_kernels", model.n_global_kernels),
      NLMW_ENUM_KEY("global_mode", model.global_mode, parse_global_mode),
      NLMW_SIZE_KEY("global_kernel_width", model.global_kernel_width),
      NLMW_SIZE_KEY("l0_window", model.l0_window),
      KeySpec{"adaptive_cutoffs",
              [](RunConfig& c, std::string_view v) {
                c.model.adaptive_cutoffs = parse_list<std::size_t>(v, parse_size);
              },
              [](const RunConfig& c) { return fmt_list(c.model.adaptive_cutoffs); }},
      NLMW_BOOL_KEY("tie_weights", model.tie_weights),
      NLMW_DOUBLE_KEY("dropout", model.dropout),
      NLMW_BOOL_KEY("use_residual", model.use_residual),
      NLMW_BOOL_KEY("use_layernorm", model.use_layernorm),
      NLMW_ENUM_KEY("activation", model.activation, parse_activation),
      NLMW_ENUM_KEY("norm_position", model.norm_position, parse_norm_position),
      NLMW_DOUBLE_KEY("init_std", model.init_std),
      NLMW_DOUBLE_KEY("ln_eps", model.ln_eps),
      NLMW_ENUM_KEY("optimizer", train.optimizer.kind, parse_optimizer),
      NLMW_DOUBLE_KEY("beta1", train.optimizer.beta1),
      NLMW_DOUBLE_KEY("beta2", train.optimizer.beta2),
      NLMW_DOUBLE_KEY("eps", train.optimizer.eps),
      NLMW_DOUBLE_KEY("weight_decay", train.optimizer.weight_decay),
      NLMW_DOUBLE_KEY("clip_norm", train.optimizer.clip_norm),
      NLMW_U64_KEY("warmup_steps", train.schedule.warmup_steps),
      NLMW_U64_KEY("max_steps", train.schedule.max_steps),
      NLMW_DOUBLE_KEY("lr_peak", train.schedule.lr_peak),
      NLMW_DOUBLE_KEY("lr_min", train.schedule.lr_min),
      NLMW_SIZE_KEY("batch_size", train.batch_size),
      NLMW_SIZE_KEY("seq_len", train.seq_len),
      NLMW_U64_KEY("seed", train.seed),
      NLMW_SIZE_KEY("valid_every", train.valid_every),
      NLMW_SIZE_KEY("log_every", train.log_every),
      NLMW_SIZE_KEY("eval_seq_len", eval.seq_len),
      NLMW_SIZE_KEY("eval_target_len", eval.target_len),
      NLMW_ENUM_KEY("eval_unit", eval.unit, parse_eval_unit),
      NLMW_SIZE_KEY("eval_batch_blocks", eval.batch_blocks),
      KeySpec{"eval_split",
              [](RunConfig& c, std::string_view v) {
                if (v != "valid" && v != "test") {
                  throw BadValue{"expected valid or test, got '" + std::string(v) + "'"};
                }
                c.eval_split = std::string(v);
              },
              [](const RunConfig& c) { return c.eval_split; }},
      NLMW_PATH_KEY("train_path", train_path),
      NLMW_PATH_KEY("valid_path", valid_path),
      NLMW_PATH_KEY("test_path", test_path),
      NLMW_ENUM_KEY("vocab_mode", vocab_mode, parse_vocab_mode),
      KeySpec{"vocab_top_k",
              [](RunConfig& c, std::string_view v) { c.vocab_limit.top_k = parse_optional_size(v); },
              [](const RunConfig& c) { return fmt_optional(c.vocab_limit.top_k); }},
      KeySpec{"vocab_min_freq",
              [](RunConfig& c, std::string_view v) {
                c.vocab_limit.min_freq = parse_optional_size(v);
              },
              [](const RunConfig& c) { return fmt_optional(c.vocab_limit.min_freq); }},
      NLMW_PATH_KEY("output_dir", output_dir),
      NLMW_PATH_KEY("checkpoint", checkpoint),
      NLMW_PATH_KEY("lambada_path", lambada_path),
      NLMW_PATH_KEY("lambada_annotations", lambada_annotations),
      NLMW_SIZE_KEY("cf_threshold", thresholds.cf_threshold),
      NLMW_U64_KEY("lf_threshold", thresholds.lf_threshold),
      NLMW_ENUM_KEY("sweep_kind", sweep.kind, parse_sweep_kind),
      KeySpec{"sweep_values",
              [](RunConfig& c, std::string_view v) {
                c.sweep.values = parse_list<std::size_t>(v, parse_size);
              },
              [](const RunConfig& c) { return fmt_list(c.sweep.values); }},
      KeySpec{"sweep_seeds",
              [](RunConfig& c, std::string_view v) {
                c.sweep.seeds = parse_list<std::uint64_t>(v, parse_u64);
              },
              [](const RunConfig& c) { return fmt_list(c.sweep.seeds); }},
  };
  return specs;
}

#undef NLMW_SIZE_KEY
#undef NLMW_U64_KEY
#undef NLMW_DOUBLE_KEY
#undef NLMW_BOOL_KEY
#undef NLMW_PATH_KEY
#undef NLMW_ENUM_KEY

const KeySpec* find_key(std::string_view name) {
  for (const KeySpec& k : key_specs()) {
    if (name == k.name) return &k;
  }
  return nullptr;
}

struct Entry {
  std::string key, value;
  std::size_t line = 0;  // 0 for overrides
};

Entry split_entry(std::string_view text, std::size_t line) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigFileError(line, "", "expected 'key = value', got '" + std::string(text) + "'");
  }
  Entry e{std::string(trim(text.substr(0, eq))), std::string(trim(text.substr(eq + 1))), line};
  if (e.key.empty()) throw ConfigFileError(line, "", "missing key before '='");
  if (!find_key(e.key)) throw ConfigFileError(line, e.key, "unknown key");
  return e;
}

// Problems are reported as "field: reason"; attribute them to the line that
// set the field when there is one.
[[noreturn]] void rethrow_problem(const std::string& problem,
                                  const std::map<std::string, std::size_t>& lines,
                                  std::size_t variant_line) {
  const auto colon = problem.find(':');
  std::string field = colon == std::string::npos ? std::string() : problem.substr(0, colon);
  const std::string reason =
      colon == std::string::npos ? problem : std::string(trim(problem.substr(colon + 1)));
  if (field.find('/') != std::string::npos) field = field.substr(0, field.find('/'));
  const auto it = lines.find(field);
  const std::size_t line = it != lines.end() ? it->second : variant_line;
  throw ConfigFileError(line, field, reason);
}

void validate_run_config(const RunConfig& c, const std::map<std::string, std::size_t>& lines) {
  const std::size_t variant_line = lines.count("variant") ? lines.at("variant") : 0;
  ModelConfig probe = c.model;
  probe.vocab_size = std::max<std::size_t>(
      2, c.model.adaptive_cutoffs.empty() ? 2 : c.model.adaptive_cutoffs.back() + 1);
  const auto problems = config_problems(probe);
  if (!problems.empty()) rethrow_problem(problems.front(), lines, variant_line);
  const auto& o = c.train.optimizer;
  std::vector<std::string> more;
  if (!(o.beta1 >= 0.0 && o.beta1 < 1.0)) more.push_back("beta1: must lie in [0, 1)");
  if (!(o.beta2 >= 0.0 && o.beta2 < 1.0)) more.push_back("beta2: must lie in [0, 1)");
  if (!(o.eps > 0.0)) more.push_back("eps: must be positive");
  if (!(o.weight_decay >= 0.0)) more.push_back("weight_decay: must be >= 0");
  if (!(o.clip_norm >= 0.0)) more.push_back("clip_norm: must be >= 0 (0 disables clipping)");
  if (c.train.batch_size == 0) more.push_back("batch_size: must be positive");
  if (c.train.seq_len == 0) more.push_back("seq_len: must be positive");
  if (!more.empty()) rethrow_problem(more.front(), lines, variant_line);
  try {
    validate(c.train.schedule);
  } catch (const ConfigError& e) {
    rethrow_problem(e.what(), lines, variant_line);
  }
  if (c.eval.seq_len == 0) rethrow_problem("eval_seq_len: must be positive", lines, variant_line);
  if (c.eval.target_len == 0 || c.eval.target_len > c.eval.seq_len) {
    rethrow_problem("eval_target_len: must lie in [1, eval_seq_len]", lines, variant_line);
  }
  if (c.eval.batch_blocks == 0) {
    rethrow_problem("eval_batch_blocks: must be positive", lines, variant_line);
  }
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const KeySpec& k : key_specs()) out.emplace_back(k.name);
  return out;
}

RunConfig parse_config_text(std::string_view text, std::span<const std::string> overrides) {
  std::vector<Entry> entries;
  std::map<std::string, std::size_t> file_lines;
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    Entry e = split_entry(line, line_no);
    if (const auto it = file_lines.find(e.key); it != file_lines.end()) {
      throw ConfigFileError(line_no, e.key,
                            "duplicate key (first set on line " + std::to_string(it->second) + ")");
    }
    file_lines[e.key] = line_no;
    entries.push_back(std::move(e));
  }
  std::map<std::string, std::size_t> seen_overrides;
  for (const std::string& o : overrides) {
    Entry e = split_entry(trim(o), 0);
    if (seen_overrides.count(e.key)) throw ConfigFileError(0, e.key, "given twice");
    seen_overrides[e.key] = 0;
    std::erase_if(entries, [&](const Entry& x) { return x.key == e.key; });
    entries.push_back(std::move(e));
  }
  std::map<std::string, std::size_t> lines;
  for (const Entry& e : entries) lines[e.key] = e.line;

  RunConfig config;
  for (const Entry& e : entries) {
    if (e.key != "variant") continue;
    try {
      config.model.variant = parse_enum(std::string_view(e.value), parse_variant);
    } catch (const BadValue& b) {
      throw ConfigFileError(e.line, e.key, b.message);
    }
  }
  config.model = default_model_config(config.model.variant);
  config.train = default_train_config(config.model.variant);
  for (const Entry& e : entries) {
    try {
      find_key(e.key)->set(config, e.value);
    } catch (const BadValue& b) {
      throw ConfigFileError(e.line, e.key, b.message);
    }
  }
  config.model.vocab_size = 0;
  validate_run_config(config, lines);
  return config;
}

RunConfig parse_config(const std::filesystem::path& path, std::span<const std::string> overrides) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const DataError& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  return parse_config_text(text, overrides);
}

std::string format_config(const RunConfig& config) {
  std::string out;
  for (const KeySpec& k : key_specs()) out += std::string(k.name) + " = " + k.get(config) + "\n";
  return out;
}

std::vector<std::string> config_diff(const RunConfig& a, const RunConfig& b) {
  std::vector<std::string> out;
  for (const KeySpec& k : key_specs()) {
    if (k.get(a) != k.get(b)) out.emplace_back(k.name);
  }
  return out;
}

}  // namespace nlmw
