// Copyright (c) 2026 The ocrfix Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <limits>

#include "tensor_internal.hpp"

namespace ocrfix {

using detail::gemm;
using detail::make_output;
using detail::Node;
using detail::records;

namespace {

// In-place masked softmax of an (rows x cols) block; `valid(i, j)` selects
// the entries that take part. Rows with no valid entry become all zero.
template <typename Valid>
void masked_softmax_rows(double* s, std::size_t rows, std::size_t cols, Valid valid) {
  for (std::size_t i = 0; i < rows; ++i) {
    double* row = s + i * cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cols; ++j) {
      if (valid(i, j)) mx = std::max(mx, row[j]);
    }
    if (mx == -std::numeric_limits<double>::infinity()) {
      std::fill(row, row + cols, 0.0);
      continue;
    }
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      row[j] = valid(i, j) ? std::exp(row[j] - mx) : 0.0;
      total += row[j];
    }
    for (std::size_t j = 0; j < cols; ++j) row[j] /= total;
  }
}

void check_lengths(std::span<const std::size_t> lengths, std::size_t batch, std::size_t max_len) {
  if (lengths.size() != batch) {
    throw Error(Errc::ShapeMismatch, "expected " + std::to_string(batch) + " key lengths, got " +
                                         std::to_string(lengths.size()));
  }
  for (std::size_t n : lengths) {
    if (n > max_len) throw Error(Errc::ShapeMismatch, "key length exceeds padded length");
  }
}

}  // namespace

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionGeometry& geo,
                            std::span<const std::size_t> key_lengths, bool causal,
                            std::vector<double>* weights_out) {
  const std::size_t B = geo.batch, Lq = geo.query_len, Lk = geo.key_len, H = geo.heads;
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) detail::shape_error("attention", q.shape(), k.shape());
  const std::size_t D = q.dim(1);
  if (H == 0 || D % H != 0 || q.dim(0) != B * Lq || k.dim(0) != B * Lk || v.dim(0) != B * Lk || k.dim(1) != D ||
      v.dim(1) != D) {
    detail::shape_error("attention", q.shape(), k.shape());
  }
  check_lengths(key_lengths, B, Lk);
  const std::size_t dh = D / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  auto out = make_output({B * Lq, D}, {&q, &k, &v});
  std::vector<double> probs(B * H * Lq * Lk);
  const double* qd = q.data().data();
  const double* kd = k.data().data();
  const double* vd = v.data().data();
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t len = key_lengths[b];
    auto valid = [len, causal](std::size_t i, std::size_t j) { return j < len && (!causal || j <= i); };
    for (std::size_t h = 0; h < H; ++h) {
      double* p = probs.data() + (b * H + h) * Lq * Lk;
      const double* qp = qd + b * Lq * D + h * dh;
      const double* kp = kd + b * Lk * D + h * dh;
      const double* vp = vd + b * Lk * D + h * dh;
      gemm(false, true, Lq, Lk, dh, scale, qp, D, kp, D, 0.0, p, Lk);
      masked_softmax_rows(p, Lq, Lk, valid);
      gemm(false, false, Lq, dh, Lk, 1.0, p, Lk, vp, D, 0.0, out->value.data() + b * Lq * D + h * dh, D);
    }
  }
  if (weights_out != nullptr) *weights_out = probs;

  if (records(out)) {
    out->backward = [B, Lq, Lk, H, D, dh, scale, probs = std::move(probs)](Node& self) {
      Node& nq = *self.parents[0];
      Node& nk = *self.parents[1];
      Node& nv = *self.parents[2];
      std::vector<double> dp(Lq * Lk);
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t h = 0; h < H; ++h) {
          const double* p = probs.data() + (b * H + h) * Lq * Lk;
          const double* go = self.grad.data() + b * Lq * D + h * dh;
          const std::size_t qoff = b * Lq * D + h * dh;
          const std::size_t koff = b * Lk * D + h * dh;
          if (nv.requires_grad) gemm(true, false, Lk, dh, Lq, 1.0, p, Lk, go, D, 1.0, nv.ensure_grad().data() + koff, D);
          if (!nq.requires_grad && !nk.requires_grad) continue;
          gemm(false, true, Lq, Lk, dh, 1.0, go, D, nv.value.data() + koff, D, 0.0, dp.data(), Lk);
          for (std::size_t i = 0; i < Lq; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < Lk; ++j) acc += p[i * Lk + j] * dp[i * Lk + j];
            for (std::size_t j = 0; j < Lk; ++j) dp[i * Lk + j] = scale * p[i * Lk + j] * (dp[i * Lk + j] - acc);
          }
          if (nq.requires_grad) {
            gemm(false, false, Lq, dh, Lk, 1.0, dp.data(), Lk, nk.value.data() + koff, D, 1.0,
                 nq.ensure_grad().data() + qoff, D);
          }
          if (nk.requires_grad) {
            gemm(true, false, Lk, dh, Lq, 1.0, dp.data(), Lk, nq.value.data() + qoff, D, 1.0,
                 nk.ensure_grad().data() + koff, D);
          }
        }
      }
    };
  }
  return Tensor(out);
}

Tensor additive_attention(const Tensor& query_proj, const Tensor& keys_proj, const Tensor& values,
                          const Tensor& energy, std::size_t key_len, std::span<const std::size_t> key_lengths,
                          std::vector<double>* weights_out) {
  const std::size_t B = query_proj.rows(), A = query_proj.cols(), L = key_len;
  if (keys_proj.rows() != B * L || keys_proj.cols() != A || values.rows() != B * L || energy.numel() != A) {
    detail::shape_error("additive_attention", query_proj.shape(), keys_proj.shape());
  }
  check_lengths(key_lengths, B, L);
  const std::size_t D = values.cols();
  auto out = make_output({B, D}, {&query_proj, &keys_proj, &values, &energy});

  std::vector<double> act(B * L * A);
  std::vector<double> w(B * L);
  const double* qp = query_proj.data().data();
  const double* kp = keys_proj.data().data();
  const double* vals = values.data().data();
  const double* e = energy.data().data();
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t j = 0; j < L; ++j) {
      double s = 0.0;
      double* t = act.data() + (b * L + j) * A;
      for (std::size_t a = 0; a < A; ++a) {
        t[a] = std::tanh(qp[b * A + a] + kp[(b * L + j) * A + a]);
        s += e[a] * t[a];
      }
      w[b * L + j] = s;
    }
    const std::size_t len = key_lengths[b];
    masked_softmax_rows(w.data() + b * L, 1, L, [len](std::size_t, std::size_t j) { return j < len; });
    double* ctx = out->value.data() + b * D;
    for (std::size_t j = 0; j < L; ++j) {
      const double wj = w[b * L + j];
      if (wj == 0.0) continue;
      for (std::size_t d = 0; d < D; ++d) ctx[d] += wj * vals[(b * L + j) * D + d];
    }
  }
  if (weights_out != nullptr) *weights_out = w;

  if (records(out)) {
    out->backward = [B, A, L, D, act = std::move(act), w = std::move(w)](Node& self) {
      Node& nq = *self.parents[0];
      Node& nk = *self.parents[1];
      Node& nv = *self.parents[2];
      Node& ne = *self.parents[3];
      for (Node* n : {&nq, &nk, &nv, &ne}) {
        if (n->requires_grad) n->ensure_grad();
      }
      std::vector<double> ds(L);
      for (std::size_t b = 0; b < B; ++b) {
        const double* gctx = self.grad.data() + b * D;
        double acc = 0.0;
        for (std::size_t j = 0; j < L; ++j) {
          double dw = 0.0;
          for (std::size_t d = 0; d < D; ++d) dw += nv.value[(b * L + j) * D + d] * gctx[d];
          ds[j] = dw;
          acc += w[b * L + j] * dw;
        }
        for (std::size_t j = 0; j < L; ++j) ds[j] = w[b * L + j] * (ds[j] - acc);
        if (nv.requires_grad) {
          auto& gv = nv.ensure_grad();
          for (std::size_t j = 0; j < L; ++j) {
            for (std::size_t d = 0; d < D; ++d) gv[(b * L + j) * D + d] += w[b * L + j] * gctx[d];
          }
        }
        for (std::size_t j = 0; j < L; ++j) {
          if (ds[j] == 0.0) continue;
          const double* t = act.data() + (b * L + j) * A;
          for (std::size_t a = 0; a < A; ++a) {
            if (ne.requires_grad) ne.ensure_grad()[a] += ds[j] * t[a];
            const double pre = ds[j] * ne.value[a] * (1.0 - t[a] * t[a]);
            if (nq.requires_grad) nq.ensure_grad()[b * A + a] += pre;
            if (nk.requires_grad) nk.ensure_grad()[(b * L + j) * A + a] += pre;
          }
        }
      }
    };
  }
  return Tensor(out);
}

}  // namespace ocrfix
