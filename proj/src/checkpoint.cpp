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

#include "nlmw/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace nlmw {
namespace {

constexpr char kMagic[4] = {'N', 'L', 'M', 'W'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename T>
void put_tensor(std::string& out, const std::string& name, const Shape& shape,
                std::span<const T> data) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) put_u64(out, d);
  for (T v : data) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

std::string double_text(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}
  bool done() const { return pos_ == bytes_.size(); }
  std::string_view take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointTruncatedError(std::string("checkpoint truncated while reading ") + what);
    }
    const std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32(const char* what) {
    const auto s = take(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
    return v;
  }
  std::uint64_t u64(const char* what) {
    const auto s = take(8, what);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
    return v;
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

struct StagedTensor {
  Shape shape;
  std::vector<float> data;
};

struct ParsedCheckpoint {
  CheckpointMeta meta;
  std::map<std::string, std::string> fields;
  std::vector<std::pair<std::string, StagedTensor>> tensors;
};

std::uint64_t parse_u64_field(const std::map<std::string, std::string>& f, const std::string& key) {
  const auto it = f.find(key);
  if (it == f.end()) throw CheckpointMismatchError("checkpoint metadata lacks '" + key + "'");
  std::uint64_t v = 0;
  const auto res = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (res.ec != std::errc() || res.ptr != it->second.data() + it->second.size()) {
    throw CheckpointError("checkpoint metadata '" + key + "' is not an integer");
  }
  return v;
}

double parse_double_field(const std::map<std::string, std::string>& f, const std::string& key) {
  const auto it = f.find(key);
  if (it == f.end()) throw CheckpointMismatchError("checkpoint metadata lacks '" + key + "'");
  if (it->second == "inf") return std::numeric_limits<double>::infinity();
  double v = 0;
  const auto res = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (res.ec != std::errc()) throw CheckpointError("checkpoint metadata '" + key + "' is not a number");
  return v;
}

ParsedCheckpoint parse_checkpoint(const std::filesystem::path& path, bool with_tensors) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  Reader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointMagicError("'" + path.string() + "' is not an NLMW checkpoint (bad magic)");
  }
  r.take(4, "magic");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw CheckpointVersionError("checkpoint format version " + std::to_string(version) +
                                 " (this build reads version " +
                                 std::to_string(kCheckpointVersion) + ")");
  }
  ParsedCheckpoint out;
  const std::uint32_t meta_len = r.u32("metadata length");
  std::string_view meta = r.take(meta_len, "metadata");
  while (!meta.empty()) {
    const std::size_t nl = meta.find('\n');
    const std::string_view line = meta.substr(0, nl);
    meta = nl == std::string_view::npos ? std::string_view{} : meta.substr(nl + 1);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw CheckpointError("malformed checkpoint metadata line");
    out.fields[std::string(line.substr(0, eq))] = std::string(line.substr(eq + 1));
  }
  out.meta.config_hash = parse_u64_field(out.fields, "config_hash");
  out.meta.step = parse_u64_field(out.fields, "step");
  out.meta.seed = parse_u64_field(out.fields, "seed");
  out.meta.optimizer_step = parse_u64_field(out.fields, "optimizer_step");
  out.meta.vocab_size = parse_u64_field(out.fields, "vocab_size");
  out.meta.best_valid_loss = parse_double_field(out.fields, "best_valid_loss");
  if (!with_tensors) return out;
  while (!r.done()) {
    const std::uint32_t name_len = r.u32("tensor name length");
    std::string name(r.take(name_len, "tensor name"));
    const std::uint32_t rank = r.u32("tensor rank");
    StagedTensor t;
    std::uint64_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      t.shape.push_back(r.u64("tensor dims"));
      numel *= t.shape.back();
    }
    if (numel > (bytes.size() / 4)) {
      throw CheckpointTruncatedError("checkpoint truncated in payload of '" + name + "'");
    }
    const std::string_view payload = r.take(numel * 4, "tensor payload");
    t.data.resize(numel);
    for (std::size_t i = 0; i < numel; ++i) {
      std::uint32_t bits = 0;
      for (int b = 3; b >= 0; --b) bits = (bits << 8) | static_cast<unsigned char>(payload[i * 4 + static_cast<std::size_t>(b)]);
      t.data[i] = std::bit_cast<float>(bits);
    }
    out.tensors.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

}  // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Model<T>& model,
                     const TrainState<T>& state) {
  std::string meta;
  meta += "config_hash=" + std::to_string(config_hash(model.config())) + "\n";
  meta += "step=" + std::to_string(state.step) + "\n";
  meta += "seed=" + std::to_string(state.seed) + "\n";
  meta += "optimizer=" + std::string(to_string(state.optimizer.config.kind)) + "\n";
  meta += "optimizer_step=" + std::to_string(state.optimizer.step) + "\n";
  meta += "vocab_size=" + std::to_string(model.config().vocab_size) + "\n";
  meta += "variant=" + std::string(to_string(model.config().variant)) + "\n";
  meta += "best_valid_loss=" + double_text(state.best_valid_loss) + "\n";

  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  const auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    put_tensor<T>(out, params[i].name, params[i].tensor.shape(), params[i].tensor.data());
  }
  if (state.optimizer.config.kind == OptimizerKind::kAdam) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      put_tensor<T>(out, params[i].name + ".adam.m", params[i].tensor.shape(), state.optimizer.m[i]);
      put_tensor<T>(out, params[i].name + ".adam.v", params[i].tensor.shape(), state.optimizer.v[i]);
    }
  }
  // Write-then-rename so an interrupted save never leaves a torn file.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot write checkpoint '" + tmp.string() + "'");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw CheckpointError("write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

template <typename T>
void load_checkpoint(const std::filesystem::path& path, Model<T>& model, TrainState<T>& state) {
  ParsedCheckpoint ck = parse_checkpoint(path, true);
  if (ck.meta.vocab_size != model.config().vocab_size) {
    throw CheckpointMismatchError("checkpoint vocab_size " + std::to_string(ck.meta.vocab_size) +
                                  " differs from the model's " +
                                  std::to_string(model.config().vocab_size));
  }
  if (ck.meta.config_hash != config_hash(model.config())) {
    throw CheckpointMismatchError("checkpoint was written by a different model configuration");
  }
  const bool adam = state.optimizer.config.kind == OptimizerKind::kAdam;
  const auto it = ck.fields.find("optimizer");
  if (it != ck.fields.end() && it->second != to_string(state.optimizer.config.kind)) {
    throw CheckpointMismatchError("checkpoint optimizer '" + it->second + "' differs from '" +
                                  std::string(to_string(state.optimizer.config.kind)) + "'");
  }
  const auto params = model.parameters();
  std::map<std::string, std::pair<std::size_t, int>> slots;  // name -> (param, 0 data / 1 m / 2 v)
  for (std::size_t i = 0; i < params.size(); ++i) {
    slots[params[i].name] = {i, 0};
    if (adam) {
      slots[params[i].name + ".adam.m"] = {i, 1};
      slots[params[i].name + ".adam.v"] = {i, 2};
    }
  }
  std::vector<std::string> unknown;
  std::map<std::string, const StagedTensor*> found;
  for (const auto& [name, t] : ck.tensors) {
    const auto s = slots.find(name);
    if (s == slots.end()) {
      unknown.push_back(name);
      continue;
    }
    const Shape& expected = params[s->second.first].tensor.shape();
    if (t.shape != expected) {
      throw CheckpointMismatchError("tensor '" + name + "' has shape " + shape_to_string(t.shape) +
                                    ", model expects " + shape_to_string(expected));
    }
    found[name] = &t;
  }
  if (!unknown.empty()) {
    std::string msg = "checkpoint holds unknown tensors:";
    for (const auto& n : unknown) msg += " " + n;
    throw CheckpointUnknownTensorError(msg);
  }
  std::vector<std::string> missing;
  for (const auto& [name, slot] : slots) {
    if (!found.count(name)) missing.push_back(name);
  }
  if (!missing.empty()) {
    std::string msg = "checkpoint lacks tensors:";
    for (const auto& n : missing) msg += " " + n;
    throw CheckpointMismatchError(msg);
  }
  // Everything verified; commit.
  for (const auto& [name, t] : found) {
    const auto [index, kind] = slots[name];
    std::span<T> dst;
    if (kind == 0) {
      dst = params[index].tensor.mutable_data();
    } else {
      auto& acc = kind == 1 ? state.optimizer.m[index] : state.optimizer.v[index];
      dst = acc;
    }
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = static_cast<T>(t->data[j]);
  }
  state.step = ck.meta.step;
  state.seed = ck.meta.seed;
  state.optimizer.step = ck.meta.optimizer_step;
  state.best_valid_loss = ck.meta.best_valid_loss;
  model.zero_grad();
}

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path) {
  return parse_checkpoint(path, false).meta;
}

template void save_checkpoint<float>(const std::filesystem::path&, const Model<float>&,
                                     const TrainState<float>&);
template void save_checkpoint<double>(const std::filesystem::path&, const Model<double>&,
                                      const TrainState<double>&);
template void load_checkpoint<float>(const std::filesystem::path&, Model<float>&,
                                     TrainState<float>&);
template void load_checkpoint<double>(const std::filesystem::path&, Model<double>&,
                                      TrainState<double>&);

}  // namespace nlmw
