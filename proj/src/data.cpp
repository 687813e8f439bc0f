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

#include "nlmw/data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace nlmw {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f' || c == '\n';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Length of the UTF-8 sequence starting at text[i], or 0 if invalid.
std::size_t utf8_length(std::string_view text, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(text[i]);
  std::size_t n;
  std::uint32_t cp;
  if (b0 < 0x80) return 1;
  if ((b0 & 0xE0) == 0xC0) {
    n = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    n = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    n = 4;
    cp = b0 & 0x07;
  } else {
    return 0;
  }
  if (i + n > text.size()) return 0;
  for (std::size_t j = 1; j < n; ++j) {
    const auto b = static_cast<unsigned char>(text[i + j]);
    if ((b & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (b & 0x3F);
  }
  static constexpr std::uint32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < kMin[n] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
  return n;
}

std::string escape_char(const std::string& token) {
  if (token == "\n") return "\\n";
  if (token == "\r") return "\\r";
  if (token == "\t") return "\\t";
  if (token == "\\") return "\\\\";
  return token;
}

std::string unescape_char(std::string_view line) {
  if (line == "\\n") return "\n";
  if (line == "\\r") return "\r";
  if (line == "\\t") return "\t";
  if (line == "\\\\") return "\\";
  return std::string(line);
}

}  // namespace

std::string_view to_string(VocabMode mode) { return mode == VocabMode::kWord ? "word" : "char"; }

VocabMode parse_vocab_mode(std::string_view text) {
  if (text == "word") return VocabMode::kWord;
  if (text == "char") return VocabMode::kChar;
  throw ConfigError("unknown vocab mode '" + std::string(text) + "' (expected word or char)");
}

Vocabulary::Vocabulary(VocabMode mode, std::vector<std::string> tokens)
    : mode_(mode), tokens_(std::move(tokens)) {
  const std::vector<std::string_view> specials =
      mode == VocabMode::kWord ? std::vector<std::string_view>{kPadToken, kUnkToken, kEosToken}
                               : std::vector<std::string_view>{kPadToken};
  if (tokens_.size() < specials.size() ||
      !std::equal(specials.begin(), specials.end(), tokens_.begin())) {
    throw DataError("vocabulary must start with its special tokens");
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw DataError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw IndexError("vocabulary: id " + std::to_string(id) + " outside [0, " +
                     std::to_string(tokens_.size()) + ")");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id_or_unk(std::string_view token) const {
  if (mode_ != VocabMode::kWord) throw DataError("char vocabulary has no UNK token");
  return find(token).value_or(kUnk);
}

std::vector<std::string> utf8_chars(std::string_view text) {
  std::vector<std::string> out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    const std::size_t n = utf8_length(text, i);
    if (n == 0) throw DataError("invalid UTF-8 at byte " + std::to_string(i));
    out.emplace_back(text.substr(i, n));
    i += n;
  }
  return out;
}

std::vector<std::string_view> split_words(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      out.push_back(text.substr(start));
      break;
    }
    out.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

Vocabulary build_vocab(std::string_view text, VocabMode mode, VocabLimit limit) {
  std::map<std::string, std::uint64_t, std::less<>> counts;
  if (mode == VocabMode::kWord) {
    for (std::string_view line : split_lines(text)) {
      for (std::string_view w : split_words(line)) {
        if (w == Vocabulary::kUnkToken || w == Vocabulary::kEosToken ||
            w == Vocabulary::kPadToken) {
          continue;
        }
        auto it = counts.find(w);
        if (it == counts.end()) {
          counts.emplace(std::string(w), 1);
        } else {
          ++it->second;
        }
      }
    }
  } else {
    for (auto& c : utf8_chars(text)) ++counts[std::move(c)];
  }
  if (counts.empty()) throw DataError("empty corpus: no tokens to build a vocabulary from");

  std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
  // std::map iteration is already lexicographic; a stable sort keeps it for ties.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.emplace_back(Vocabulary::kPadToken);
  if (mode == VocabMode::kWord) {
    tokens.emplace_back(Vocabulary::kUnkToken);
    tokens.emplace_back(Vocabulary::kEosToken);
  }
  std::size_t kept = 0;
  for (auto& [tok, n] : ranked) {
    if (limit.top_k && kept >= *limit.top_k) break;
    if (limit.min_freq && n < *limit.min_freq) break;
    if (mode == VocabMode::kChar && tok == Vocabulary::kPadToken) continue;
    tokens.push_back(std::move(tok));
    ++kept;
  }
  return Vocabulary(mode, std::move(tokens));
}

CorpusSplit encode_corpus(std::string_view text, const Vocabulary& vocab) {
  CorpusSplit split;
  if (vocab.mode() == VocabMode::kWord) {
    for (std::string_view line : split_lines(text)) {
      for (std::string_view w : split_words(line)) split.ids.push_back(vocab.id_or_unk(w));
      split.ids.push_back(Vocabulary::kEos);
      ++split.lines;
    }
    return split;
  }
  const auto chars = utf8_chars(text);
  split.ids.reserve(chars.size());
  for (std::size_t i = 0; i < chars.size(); ++i) {
    const auto id = vocab.find(chars[i]);
    if (!id || *id == Vocabulary::kPad) {
      throw DataError("character '" + escape_char(chars[i]) + "' at position " +
                      std::to_string(i) + " is not in the vocabulary");
    }
    split.ids.push_back(*id);
    if (chars[i] == "\n") ++split.lines;
  }
  if (!chars.empty() && chars.back() != "\n") ++split.lines;
  return split;
}

std::vector<std::string> decode_tokens(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId id : ids) out.push_back(vocab.token(id));
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("write to '" + path.string() + "' failed");
}

Corpus load_corpus(const std::filesystem::path& train, const std::filesystem::path& valid,
                   const std::filesystem::path& test, VocabMode mode, VocabLimit limit) {
  Corpus corpus;
  const std::string train_text = read_text_file(train);
  corpus.vocab = build_vocab(train_text, mode, limit);
  corpus.train = encode_corpus(train_text, corpus.vocab);
  if (!valid.empty()) corpus.valid = encode_corpus(read_text_file(valid), corpus.vocab);
  if (!test.empty()) corpus.test = encode_corpus(read_text_file(test), corpus.vocab);
  return corpus;
}

std::string export_vocab(const Vocabulary& vocab) {
  std::string out;
  for (const auto& tok : vocab.tokens()) {
    out += vocab.mode() == VocabMode::kChar ? escape_char(tok) : tok;
    out += '\n';
  }
  return out;
}

Vocabulary import_vocab(std::string_view text, VocabMode mode) {
  std::vector<std::string> tokens;
  for (std::string_view line : split_lines(text)) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    tokens.push_back(mode == VocabMode::kChar ? unescape_char(line) : std::string(line));
  }
  return Vocabulary(mode, std::move(tokens));
}

BatchStream::BatchStream(std::vector<TokenId> split, std::size_t batch_size, std::size_t seq_len)
    : ids_(std::move(split)), batch_size_(batch_size), seq_len_(seq_len) {
  if (batch_size == 0 || seq_len == 0) throw ConfigError("batch_size and seq_len must be positive");
  const std::size_t needed = batch_size * (seq_len + 1);
  if (ids_.size() < needed) {
    throw DataError("split has " + std::to_string(ids_.size()) + " tokens; batch_size " +
                    std::to_string(batch_size) + " x (seq_len " + std::to_string(seq_len) +
                    " + 1) needs at least " + std::to_string(needed));
  }
  segment_ = ids_.size() / batch_size;
  batches_ = (segment_ - 1) / seq_len;
}

Batch BatchStream::batch(std::size_t i) const {
  if (i >= batches_) {
    throw IndexError("batch " + std::to_string(i) + " outside [0, " + std::to_string(batches_) +
                     ")");
  }
  Batch b;
  b.layout = {batch_size_, seq_len_};
  b.inputs.resize(batch_size_ * seq_len_);
  b.targets.resize(batch_size_ * seq_len_);
  for (std::size_t s = 0; s < batch_size_; ++s) {
    const std::size_t base = s * segment_ + i * seq_len_;
    for (std::size_t t = 0; t < seq_len_; ++t) {
      b.inputs[s * seq_len_ + t] = ids_[base + t];
      b.targets[s * seq_len_ + t] = ids_[base + t + 1];
    }
  }
  return b;
}

bool BatchStream::next(Batch& out) {
  if (cursor_ >= batches_) return false;
  out = batch(cursor_++);
  return true;
}

std::uint64_t TokenFrequencyTable::count(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= counts.size()) {
    throw IndexError("frequency table: id " + std::to_string(id) + " out of range");
  }
  return counts[static_cast<std::size_t>(id)];
}

std::uint64_t TokenFrequencyTable::total() const {
  std::uint64_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

TokenFrequencyTable token_frequency_table(std::span<const TokenId> train, std::size_t vocab_size) {
  TokenFrequencyTable table;
  table.counts.assign(vocab_size, 0);
  for (TokenId id : train) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
      throw IndexError("frequency table: id " + std::to_string(id) + " outside vocabulary");
    }
    ++table.counts[static_cast<std::size_t>(id)];
  }
  return table;
}

LambadaSet load_lambada_items(std::string_view text, const Vocabulary& vocab,
                              std::optional<std::string_view> annotations) {
  if (vocab.mode() != VocabMode::kWord) throw DataError("LAMBADA items need a word vocabulary");
  const auto records = split_lines(text);
  std::vector<bool> flags;
  if (annotations) {
    const auto lines = split_lines(*annotations);
    if (lines.size() != records.size()) {
      throw DataError("annotation file has " + std::to_string(lines.size()) +
                      " lines for " + std::to_string(records.size()) + " records");
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const std::string_view v = trim(lines[i]);
      if (v != "0" && v != "1") {
        throw DataError("annotation line " + std::to_string(i + 1) + ": expected 0 or 1, got '" +
                        std::string(v) + "'");
      }
      flags.push_back(v == "1");
    }
  }
  LambadaSet set;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto words = split_words(records[r]);
    if (words.size() < 2) {
      set.warnings.push_back("record " + std::to_string(r + 1) + " skipped: " +
                             (words.empty() ? "empty passage" : "no context before the target"));
      continue;
    }
    LambadaItem item;
    item.record = r;
    for (std::size_t i = 0; i + 1 < words.size(); ++i) item.context.push_back(vocab.id_or_unk(words[i]));
    const auto target = vocab.find(words.back());
    item.target = target.value_or(Vocabulary::kUnk);
    item.target_oov = !target.has_value();
    if (annotations) item.entity = flags[r];
    set.items.push_back(std::move(item));
  }
  return set;
}

}  // namespace nlmw
