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

#include "nlmw/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "kernels.hpp"

namespace nlmw {
namespace {

template <typename T>
void require_matrix(const Tensor<T>& t, const char* op, const char* arg) {
  if (!t.defined() || t.rank() != 2) {
    throw ShapeError(std::string(op) + ": " + arg + " must be a matrix, got " +
                     (t.defined() ? shape_to_string(t.shape()) : std::string("<undefined>")));
  }
}

// Whether `b` is broadcast as a row vector over `a`.
template <typename T>
bool broadcasts_as_row(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() == b.shape()) return false;
  if (b.rank() == 1 && b.numel() == a.cols()) return true;
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_to_string(a.shape()) +
                   " and " + shape_to_string(b.shape()));
}

void check_id(TokenId id, std::size_t limit, const char* op) {
  if (id < 0 || static_cast<std::size_t>(id) >= limit) {
    throw IndexError(std::string(op) + ": id " + std::to_string(id) + " outside [0, " +
                     std::to_string(limit) + ")");
  }
}

}  // namespace

template <typename T>
void accumulate_grad(Tensor<T> t, std::span<const T> delta) {
  if (!t.requires_grad()) return;
  std::span<T> g = t.grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a, "matmul", "a");
  require_matrix(b, "matmul", "b");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: inner dimensions differ: " + shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()));
  }
  Tensor<T> out = Tensor<T>::zeros({m, n});
  kernels::gemm_acc(m, k, n, a.data().data(), b.data().data(), out.mutable_data().data());
  if (tape.needs_grad({&a, &b})) {
    out.set_requires_grad(true);
    tape.record(out, {a, b}, [a, b, out, m, k, n]() {
      const T* dc = out.grad().data();
      if (a.requires_grad()) {
        const std::vector<T> bt = kernels::transpose(k, n, b.data().data());
        std::vector<T> da(m * k, T{0});
        kernels::gemm_acc(m, n, k, dc, bt.data(), da.data());
        accumulate_grad<T>(a, da);
      }
      if (b.requires_grad()) {
        const std::vector<T> at = kernels::transpose(m, k, a.data().data());
        std::vector<T> db(k * n, T{0});
        kernels::gemm_acc(k, m, n, at.data(), dc, db.data());
        accumulate_grad<T>(b, db);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> matmul_nt(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a, "matmul_nt", "a");
  require_matrix(b, "matmul_nt", "b");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
  if (b.shape()[1] != k) {
    throw ShapeError("matmul_nt: inner dimensions differ: " + shape_to_string(a.shape()) +
                     " x " + shape_to_string(b.shape()) + "^T");
  }
  Tensor<T> out = Tensor<T>::zeros({m, n});
  {
    const std::vector<T> bt = kernels::transpose(n, k, b.data().data());
    kernels::gemm_acc(m, k, n, a.data().data(), bt.data(), out.mutable_data().data());
  }
  if (tape.needs_grad({&a, &b})) {
    out.set_requires_grad(true);
    tape.record(out, {a, b}, [a, b, out, m, k, n]() {
      const T* dc = out.grad().data();
      if (a.requires_grad()) {
        std::vector<T> da(m * k, T{0});
        kernels::gemm_acc(m, n, k, dc, b.data().data(), da.data());
        accumulate_grad<T>(a, da);
      }
      if (b.requires_grad()) {
        const std::vector<T> dct = kernels::transpose(m, n, dc);
        std::vector<T> db(n * k, T{0});
        kernels::gemm_acc(n, m, k, dct.data(), a.data().data(), db.data());
        accumulate_grad<T>(b, db);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  const bool row = broadcasts_as_row(a, b, "add");
  const std::size_t cols = a.cols();
  std::vector<T> y(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bd[row ? i % cols : i];
  Tensor<T> out(a.shape(), std::move(y));
  if (tape.needs_grad({&a, &b})) {
    out.set_requires_grad(true);
    tape.record(out, {a, b}, [a, b, out, row, cols]() {
      const auto g = out.grad();
      accumulate_grad<T>(a, g);
      if (b.requires_grad()) {
        if (!row) {
          accumulate_grad<T>(b, g);
        } else {
          std::vector<T> db(cols, T{0});
          for (std::size_t i = 0; i < g.size(); ++i) db[i % cols] += g[i];
          accumulate_grad<T>(b, db);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  const bool row = broadcasts_as_row(a, b, "mul");
  const std::size_t cols = a.cols();
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<T> y(ad.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = ad[i] * bd[row ? i % cols : i];
  Tensor<T> out(a.shape(), std::move(y));
  if (tape.needs_grad({&a, &b})) {
    out.set_requires_grad(true);
    tape.record(out, {a, b}, [a, b, out, row, cols]() {
      const auto g = out.grad();
      const auto ad = a.data();
      const auto bd = b.data();
      if (a.requires_grad()) {
        std::vector<T> da(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) da[i] = g[i] * bd[row ? i % cols : i];
        accumulate_grad<T>(a, da);
      }
      if (b.requires_grad()) {
        std::vector<T> db(b.numel(), T{0});
        for (std::size_t i = 0; i < g.size(); ++i) db[row ? i % cols : i] += g[i] * ad[i];
        accumulate_grad<T>(b, db);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, double factor) {
  const T f = static_cast<T>(factor);
  std::vector<T> y(a.data().begin(), a.data().end());
  for (T& v : y) v *= f;
  Tensor<T> out(a.shape(), std::move(y));
  if (tape.needs_grad({&a})) {
    out.set_requires_grad(true);
    tape.record(out, {a}, [a, out, f]() {
      std::vector<T> da(out.grad().begin(), out.grad().end());
      for (T& v : da) v *= f;
      accumulate_grad<T>(a, da);
    });
  }
  return out;
}

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x) {
  std::vector<T> y(x.data().begin(), x.data().end());
  for (T& v : y) v = v > T{0} ? v : T{0};
  Tensor<T> out(x.shape(), std::move(y));
  if (tape.needs_grad({&x})) {
    out.set_requires_grad(true);
    tape.record(out, {x}, [x, out]() {
      const auto g = out.grad();
      const auto xd = x.data();
      std::vector<T> dx(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] = xd[i] > T{0} ? g[i] : T{0};
      accumulate_grad<T>(x, dx);
    });
  }
  return out;
}

template <typename T>
Tensor<T> tanh(Tape<T>& tape, const Tensor<T>& x) {
  std::vector<T> y(x.data().begin(), x.data().end());
  for (T& v : y) v = std::tanh(v);
  Tensor<T> out(x.shape(), std::move(y));
  if (tape.needs_grad({&x})) {
    out.set_requires_grad(true);
    tape.record(out, {x}, [x, out]() {
      const auto g = out.grad();
      const auto yd = out.data();
      std::vector<T> dx(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] = g[i] * (T{1} - yd[i] * yd[i]);
      accumulate_grad<T>(x, dx);
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x) {
  double total = 0.0;
  for (T v : x.data()) total += v;
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(total));
  if (tape.needs_grad({&x})) {
    out.set_requires_grad(true);
    tape.record(out, {x}, [x, out]() {
      accumulate_grad<T>(x, std::vector<T>(x.numel(), out.grad()[0]));
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x) {
  double total = 0.0;
  for (T v : x.data()) total += v;
  const double n = static_cast<double>(x.numel());
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(total / n));
  if (tape.needs_grad({&x})) {
    out.set_requires_grad(true);
    tape.record(out, {x}, [x, out, n]() {
      accumulate_grad<T>(x, std::vector<T>(x.numel(), static_cast<T>(out.grad()[0] / n)));
    });
  }
  return out;
}

template <typename T>
Tensor<T> layer_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& bias, double eps) {
  const std::size_t d = x.cols();
  const std::size_t rows = x.rows();
  if (gain.rank() != 1 || gain.numel() != d || bias.rank() != 1 || bias.numel() != d) {
    throw ShapeError("layer_norm: gain/bias " + shape_to_string(gain.shape()) + "/" +
                     shape_to_string(bias.shape()) + " do not match input " +
                     shape_to_string(x.shape()));
  }
  if (!(eps > 0.0)) throw ConfigError("layer_norm: eps must be positive");
  const auto xd = x.data();
  const auto gd = gain.data();
  const auto bd = bias.data();
  std::vector<T> xhat(xd.size());
  std::vector<T> rstd(rows);
  std::vector<T> y(xd.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = xd.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + eps);
    rstd[r] = static_cast<T>(rs);
    for (std::size_t j = 0; j < d; ++j) {
      const T h = static_cast<T>((xr[j] - mu) * rs);
      xhat[r * d + j] = h;
      y[r * d + j] = h * gd[j] + bd[j];
    }
  }
  Tensor<T> out(x.shape(), std::move(y));
  if (tape.needs_grad({&x, &gain, &bias})) {
    out.set_requires_grad(true);
    tape.record(out, {x, gain, bias},
                [x, gain, bias, out, xhat = std::move(xhat), rstd = std::move(rstd), d, rows]() {
                  const auto g = out.grad();
                  const auto gd = gain.data();
                  std::vector<T> dx(x.requires_grad() ? g.size() : 0);
                  std::vector<T> dgain(d, T{0});
                  std::vector<T> dbias(d, T{0});
                  for (std::size_t r = 0; r < rows; ++r) {
                    const T* gr = g.data() + r * d;
                    const T* hr = xhat.data() + r * d;
                    double mean_dh = 0.0;
                    double mean_dh_h = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                      const double dh = static_cast<double>(gr[j]) * gd[j];
                      mean_dh += dh;
                      mean_dh_h += dh * hr[j];
                      dgain[j] += gr[j] * hr[j];
                      dbias[j] += gr[j];
                    }
                    mean_dh /= static_cast<double>(d);
                    mean_dh_h /= static_cast<double>(d);
                    if (x.requires_grad()) {
                      for (std::size_t j = 0; j < d; ++j) {
                        const double dh = static_cast<double>(gr[j]) * gd[j];
                        dx[r * d + j] =
                            static_cast<T>(rstd[r] * (dh - mean_dh - hr[j] * mean_dh_h));
                      }
                    }
                  }
                  accumulate_grad<T>(x, dx);
                  accumulate_grad<T>(gain, dgain);
                  accumulate_grad<T>(bias, dbias);
                });
  }
  return out;
}

namespace {

// Row-wise log-sum-exp with max subtraction.
template <typename T>
std::vector<double> row_logsumexp(std::span<const T> x, std::size_t rows, std::size_t cols) {
  std::vector<double> lse(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.data() + r * cols;
    T mx = xr[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += std::exp(static_cast<double>(xr[j]) - mx);
    lse[r] = mx + std::log(s);
  }
  return lse;
}

}  // namespace

template <typename T>
Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& logits) {
  const std::size_t cols = logits.cols(), rows = logits.rows();
  const auto lse = row_logsumexp(logits.data(), rows, cols);
  const auto xd = logits.data();
  std::vector<T> y(xd.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) {
      y[r * cols + j] = static_cast<T>(std::exp(xd[r * cols + j] - lse[r]));
    }
  }
  Tensor<T> out(logits.shape(), std::move(y));
  if (tape.needs_grad({&logits})) {
    out.set_requires_grad(true);
    tape.record(out, {logits}, [logits, out, rows, cols]() {
      const auto g = out.grad();
      const auto yd = out.data();
      std::vector<T> dx(g.size());
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < cols; ++j) dot += g[r * cols + j] * yd[r * cols + j];
        for (std::size_t j = 0; j < cols; ++j) {
          dx[r * cols + j] = static_cast<T>(yd[r * cols + j] * (g[r * cols + j] - dot));
        }
      }
      accumulate_grad<T>(logits, dx);
    });
  }
  return out;
}

template <typename T>
Tensor<T> log_softmax(Tape<T>& tape, const Tensor<T>& logits) {
  const std::size_t cols = logits.cols(), rows = logits.rows();
  const auto lse = row_logsumexp(logits.data(), rows, cols);
  const auto xd = logits.data();
  std::vector<T> y(xd.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) {
      y[r * cols + j] = static_cast<T>(xd[r * cols + j] - lse[r]);
    }
  }
  Tensor<T> out(logits.shape(), std::move(y));
  if (tape.needs_grad({&logits})) {
    out.set_requires_grad(true);
    tape.record(out, {logits}, [logits, out, rows, cols]() {
      const auto g = out.grad();
      const auto yd = out.data();
      std::vector<T> dx(g.size());
      for (std::size_t r = 0; r < rows; ++r) {
        double gs = 0.0;
        for (std::size_t j = 0; j < cols; ++j) gs += g[r * cols + j];
        for (std::size_t j = 0; j < cols; ++j) {
          dx[r * cols + j] =
              static_cast<T>(g[r * cols + j] - std::exp(static_cast<double>(yd[r * cols + j])) * gs);
        }
      }
      accumulate_grad<T>(logits, dx);
    });
  }
  return out;
}

template <typename T>
Tensor<T> softmax_cross_entropy(Tape<T>& tape, const Tensor<T>& logits,
                                std::span<const TokenId> targets) {
  require_matrix(logits, "softmax_cross_entropy", "logits");
  const std::size_t rows = logits.rows(), cols = logits.cols();
  if (targets.size() != rows) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(rows) + " rows");
  }
  for (TokenId t : targets) check_id(t, cols, "softmax_cross_entropy");
  const auto lse = row_logsumexp(logits.data(), rows, cols);
  const auto xd = logits.data();
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) total += lse[r] - xd[r * cols + targets[r]];
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(total / static_cast<double>(rows)));
  if (tape.needs_grad({&logits})) {
    out.set_requires_grad(true);
    std::vector<TokenId> tgt(targets.begin(), targets.end());
    tape.record(out, {logits}, [logits, out, lse, tgt = std::move(tgt), rows, cols]() {
      const double scale = out.grad()[0] / static_cast<double>(rows);
      const auto xd = logits.data();
      std::vector<T> dx(rows * cols);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < cols; ++j) {
          double p = std::exp(static_cast<double>(xd[r * cols + j]) - lse[r]);
          if (static_cast<TokenId>(j) == tgt[r]) p -= 1.0;
          dx[r * cols + j] = static_cast<T>(p * scale);
        }
      }
      accumulate_grad<T>(logits, dx);
    });
  }
  return out;
}

template <typename T>
Tensor<T> embedding_lookup(Tape<T>& tape, const Tensor<T>& table, std::span<const TokenId> ids) {
  require_matrix(table, "embedding_lookup", "table");
  const std::size_t rows = table.shape()[0], d = table.shape()[1];
  if (ids.empty()) throw ShapeError("embedding_lookup: empty id list");
  for (TokenId id : ids) check_id(id, rows, "embedding_lookup");
  const auto td = table.data();
  std::vector<T> y(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(td.data() + static_cast<std::size_t>(ids[i]) * d, d, y.data() + i * d);
  }
  Tensor<T> out({ids.size(), d}, std::move(y));
  if (tape.needs_grad({&table})) {
    out.set_requires_grad(true);
    std::vector<TokenId> idv(ids.begin(), ids.end());
    tape.record(out, {table}, [table, out, idv = std::move(idv), rows, d]() {
      const auto g = out.grad();
      std::vector<T> dt(rows * d, T{0});
      for (std::size_t i = 0; i < idv.size(); ++i) {
        T* dst = dt.data() + static_cast<std::size_t>(idv[i]) * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += g[i * d + j];
      }
      accumulate_grad<T>(table, dt);
    });
  }
  return out;
}

template <typename T>
Tensor<T> pick(Tape<T>& tape, const Tensor<T>& x, std::span<const TokenId> cols) {
  require_matrix(x, "pick", "x");
  const std::size_t rows = x.rows(), width = x.cols();
  if (cols.size() != rows) throw ShapeError("pick: one column per row required");
  for (TokenId c : cols) check_id(c, width, "pick");
  std::vector<T> y(rows);
  for (std::size_t r = 0; r < rows; ++r) y[r] = x.at(r, static_cast<std::size_t>(cols[r]));
  Tensor<T> out({rows}, std::move(y));
  if (tape.needs_grad({&x})) {
    out.set_requires_grad(true);
    std::vector<TokenId> cv(cols.begin(), cols.end());
    tape.record(out, {x}, [x, out, cv = std::move(cv), width]() {
      const auto g = out.grad();
      std::vector<T> dx(x.numel(), T{0});
      for (std::size_t r = 0; r < cv.size(); ++r) dx[r * width + cv[r]] = g[r];
      accumulate_grad<T>(x, dx);
    });
  }
  return out;
}

template <typename T>
Tensor<T> slice_rows(Tape<T>& tape, const Tensor<T>& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_rows", "x");
  if (begin >= end || end > x.rows()) {
    throw IndexError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for " + std::to_string(x.rows()) + " rows");
  }
  const std::size_t d = x.cols();
  std::vector<T> y(x.data().begin() + begin * d, x.data().begin() + end * d);
  Tensor<T> out({end - begin, d}, std::move(y));
  if (tape.needs_grad({&x})) {
    out.set_requires_grad(true);
    tape.record(out, {x}, [x, out, begin, d]() {
      std::vector<T> dx(x.numel(), T{0});
      std::copy(out.grad().begin(), out.grad().end(), dx.begin() + begin * d);
      accumulate_grad<T>(x, dx);
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat_cols(Tape<T>& tape, std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t total = 0;
  bool grad = false;
  for (const Tensor<T>& p : parts) {
    require_matrix(p, "concat_cols", "part");
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    total += p.cols();
    grad = grad || tape.needs_grad({&p});
  }
  std::vector<T> y(rows * total);
  std::size_t offset = 0;
  for (const Tensor<T>& p : parts) {
    const std::size_t c = p.cols();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(p.data().data() + r * c, c, y.data() + r * total + offset);
    }
    offset += c;
  }
  Tensor<T> out({rows, total}, std::move(y));
  if (grad) {
    out.set_requires_grad(true);
    std::vector<Tensor<T>> inputs(parts.begin(), parts.end());
    tape.record(out, inputs, [inputs, out, rows, total]() {
      const auto g = out.grad();
      std::size_t offset = 0;
      for (const Tensor<T>& p : inputs) {
        const std::size_t c = p.cols();
        if (p.requires_grad()) {
          std::vector<T> dp(rows * c);
          for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(g.data() + r * total + offset, c, dp.data() + r * c);
          }
          accumulate_grad<T>(p, dp);
        }
        offset += c;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& x, double p, Mode mode, const CounterRng& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ConfigError("dropout probability must lie in [0, 1), got " + std::to_string(p));
  }
  if (mode == Mode::kEval || p == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  const auto xd = x.data();
  std::vector<T> mask(xd.size());
  std::vector<T> y(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) {
    mask[i] = rng.uniform_at(i) < p ? T{0} : keep_scale;
    y[i] = xd[i] * mask[i];
  }
  Tensor<T> out(x.shape(), std::move(y));
  if (tape.needs_grad({&x})) {
    out.set_requires_grad(true);
    tape.record(out, {x}, [x, out, mask = std::move(mask)]() {
      const auto g = out.grad();
      std::vector<T> dx(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] = g[i] * mask[i];
      accumulate_grad<T>(x, dx);
    });
  }
  return out;
}

#define NLMW_INSTANTIATE_OPS(T)                                                              \
  template void accumulate_grad<T>(Tensor<T>, std::span<const T>);                           \
  template Tensor<T> matmul<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> matmul_nt<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> add<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> mul<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> scale<T>(Tape<T>&, const Tensor<T>&, double);                           \
  template Tensor<T> relu<T>(Tape<T>&, const Tensor<T>&);                                    \
  template Tensor<T> tanh<T>(Tape<T>&, const Tensor<T>&);                                    \
  template Tensor<T> sum<T>(Tape<T>&, const Tensor<T>&);                                     \
  template Tensor<T> mean<T>(Tape<T>&, const Tensor<T>&);                                    \
  template Tensor<T> layer_norm<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&,             \
                                   const Tensor<T>&, double);                                \
  template Tensor<T> softmax<T>(Tape<T>&, const Tensor<T>&);                                 \
  template Tensor<T> log_softmax<T>(Tape<T>&, const Tensor<T>&);                             \
  template Tensor<T> softmax_cross_entropy<T>(Tape<T>&, const Tensor<T>&,                    \
                                              std::span<const TokenId>);                     \
  template Tensor<T> embedding_lookup<T>(Tape<T>&, const Tensor<T>&, std::span<const TokenId>); \
  template Tensor<T> pick<T>(Tape<T>&, const Tensor<T>&, std::span<const TokenId>);          \
  template Tensor<T> slice_rows<T>(Tape<T>&, const Tensor<T>&, std::size_t, std::size_t);    \
  template Tensor<T> concat_cols<T>(Tape<T>&, std::span<const Tensor<T>>);                   \
  template Tensor<T> dropout<T>(Tape<T>&, const Tensor<T>&, double, Mode, const CounterRng&);

NLMW_INSTANTIATE_OPS(float)
NLMW_INSTANTIATE_OPS(double)

}  // namespace nlmw
