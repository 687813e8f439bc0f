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
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nlmw/layers.hpp"

namespace nlmw {

enum class VocabMode { kWord, kChar };

std::string_view to_string(VocabMode mode);
VocabMode parse_vocab_mode(std::string_view text);

// Both limits may be combined; unset means unlimited.
struct VocabLimit {
  std::optional<std::size_t> top_k;
  std::optional<std::size_t> min_freq;
};

/// Dense token <-> id mapping with the special tokens pinned first.
///
/// Word mode: PAD = 0, UNK = 1, EOS = 2. Char mode: PAD = 0 only, every
/// other entry is a single Unicode scalar value.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kEos = 2;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";
  static constexpr std::string_view kEosToken = "<eos>";

  Vocabulary() = default;
  // `tokens` must start with the specials of `mode`.
  Vocabulary(VocabMode mode, std::vector<std::string> tokens);

  VocabMode mode() const { return mode_; }
  std::size_t size() const { return tokens_.size(); }
  std::size_t special_count() const { return mode_ == VocabMode::kWord ? 3 : 1; }
  const std::string& token(TokenId id) const;
  std::optional<TokenId> find(std::string_view token) const;
  // Word mode only: OOV tokens map to UNK.
  TokenId id_or_unk(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocabulary& other) const {
    return mode_ == other.mode_ && tokens_ == other.tokens_;
  }

 private:
  VocabMode mode_ = VocabMode::kWord;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// UTF-8 encoded scalar values of `text`; invalid UTF-8 raises DataError.
std::vector<std::string> utf8_chars(std::string_view text);

// Whitespace-separated tokens of one line.
std::vector<std::string_view> split_words(std::string_view line);

// Lines of `text`; a trailing newline does not open an extra line.
std::vector<std::string_view> split_lines(std::string_view text);

// Specials first, then by descending count with lexicographic ties. The
// literal tokens "<unk>" and "<eos>" in word-mode text are the specials.
Vocabulary build_vocab(std::string_view text, VocabMode mode, VocabLimit limit = {});

struct CorpusSplit {
  std::vector<TokenId> ids;
  std::size_t lines = 0;
};

// Word mode appends EOS after every line and maps OOV tokens to UNK. Char
// mode emits one id per scalar value, newlines included; characters missing
// from the vocabulary raise DataError.
CorpusSplit encode_corpus(std::string_view text, const Vocabulary& vocab);

// Token strings for `ids`.
std::vector<std::string> decode_tokens(std::span<const TokenId> ids, const Vocabulary& vocab);

struct Corpus {
  Vocabulary vocab;
  CorpusSplit train, valid, test;
};

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

// Vocabulary from the training file; every split encoded with it. Empty
// paths leave the corresponding split empty.
Corpus load_corpus(const std::filesystem::path& train, const std::filesystem::path& valid,
                   const std::filesystem::path& test, VocabMode mode, VocabLimit limit = {});

// One token per line, line number = id. Char-mode tokens escape "\n", "\r",
// "\t" and "\\".
std::string export_vocab(const Vocabulary& vocab);
Vocabulary import_vocab(std::string_view text, VocabMode mode);

struct Batch {
  std::vector<TokenId> inputs;   // batch x seq_len, row-major
  std::vector<TokenId> targets;  // inputs shifted by one position
  SequenceLayout layout;
};

/// Standard contiguous LM batching.
///
/// The split is cut into batch_size equal segments (remainder dropped);
/// batch i holds positions [i * seq_len, (i + 1) * seq_len) of every segment.
class BatchStream {
 public:
  BatchStream(std::vector<TokenId> split, std::size_t batch_size, std::size_t seq_len);

  std::size_t size() const { return batches_; }
  std::size_t batch_size() const { return batch_size_; }
  std::size_t seq_len() const { return seq_len_; }
  std::size_t segment_length() const { return segment_; }

  Batch batch(std::size_t i) const;

  // Sequential iteration; returns false once the epoch is exhausted.
  bool next(Batch& out);
  void reset() { cursor_ = 0; }

 private:
  std::vector<TokenId> ids_;
  std::size_t batch_size_, seq_len_, segment_, batches_;
  std::size_t cursor_ = 0;
};

struct TokenFrequencyTable {
  std::vector<std::uint64_t> counts;  // indexed by id
  std::uint64_t count(TokenId id) const;
  std::uint64_t total() const;
};

TokenFrequencyTable token_frequency_table(std::span<const TokenId> train, std::size_t vocab_size);

struct LambadaItem {
  std::size_t record = 0;  // line index in the source file
  std::vector<TokenId> context;
  TokenId target = 0;
  bool target_oov = false;
  std::optional<bool> entity;
};

struct LambadaSet {
  std::vector<LambadaItem> items;
  std::vector<std::string> warnings;
};

// One passage per line; the last whitespace token is the target. The
// optional annotation text holds one "0"/"1" line per record.
LambadaSet load_lambada_items(std::string_view text, const Vocabulary& vocab,
                              std::optional<std::string_view> annotations = std::nullopt);

}  // namespace nlmw
