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
#include <cstdint>
#include <limits>

#include "tensor_internal.hpp"

namespace ocrfix {

using detail::make_output;
using detail::Node;
using detail::records;

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) detail::shape_error(op, a.shape(), b.shape());
}

// Shared shape of an elementwise unary op whose derivative is a function of
// the output value.
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv_from_output) {
  auto out = make_output(a.shape(), {&a});
  const auto in = a.data();
  for (std::size_t i = 0; i < in.size(); ++i) out->value[i] = fwd(in[i]);
  if (records(out)) {
    out->backward = [deriv_from_output](Node& self) {
      Node& p = *self.parents[0];
      auto& g = p.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv_from_output(self.value[i]);
    };
  }
  return Tensor(out);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) detail::shape_error("matmul", a.shape(), b.shape());
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto out = make_output({m, n}, {&a, &b});
  detail::gemm(false, false, m, n, k, 1.0, a.data().data(), k, b.data().data(), n, 0.0, out->value.data(), n);
  if (records(out)) {
    out->backward = [m, k, n](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) {
        detail::gemm(false, true, m, k, n, 1.0, self.grad.data(), n, pb.value.data(), n, 1.0,
                     pa.ensure_grad().data(), k);
      }
      if (pb.requires_grad) {
        detail::gemm(true, false, k, n, m, 1.0, pa.value.data(), k, self.grad.data(), n, 1.0,
                     pb.ensure_grad().data(), n);
      }
    };
  }
  return Tensor(out);
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  auto out = make_output(a.shape(), {&a, &b});
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) out->value[i] = x[i] + y[i];
  if (records(out)) {
    out->backward = [](Node& self) {
      for (auto& parent : self.parents) {
        if (!parent->requires_grad) continue;
        auto& g = parent->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  auto out = make_output(a.shape(), {&a, &b});
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) out->value[i] = x[i] - y[i];
  if (records(out)) {
    out->backward = [](Node& self) {
      if (self.parents[0]->requires_grad) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
      if (self.parents[1]->requires_grad) {
        auto& g = self.parents[1]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  auto out = make_output(a.shape(), {&a, &b});
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) out->value[i] = x[i] * y[i];
  if (records(out)) {
    out->backward = [](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) {
        auto& g = pa.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
      }
      if (pb.requires_grad) {
        auto& g = pb.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
      }
    };
  }
  return Tensor(out);
}

Tensor scale(const Tensor& a, double factor) {
  auto out = make_output(a.shape(), {&a});
  const auto x = a.data();
  for (std::size_t i = 0; i < x.size(); ++i) out->value[i] = x[i] * factor;
  if (records(out)) {
    out->backward = [factor](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
    };
  }
  return Tensor(out);
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (bias.numel() != x.cols()) detail::shape_error("add_bias", x.shape(), bias.shape());
  const std::size_t rows = x.rows(), cols = x.cols();
  auto out = make_output(x.shape(), {&x, &bias});
  const auto xv = x.data();
  const auto bv = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out->value[r * cols + c] = xv[r * cols + c] + bv[c];
  }
  if (records(out)) {
    out->backward = [rows, cols](Node& self) {
      if (self.parents[0]->requires_grad) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
      if (self.parents[1]->requires_grad) {
        auto& g = self.parents[1]->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) g[c] += self.grad[r * cols + c];
        }
      }
    };
  }
  return Tensor(out);
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw Error(Errc::ShapeMismatch, "concat of nothing");
  Shape shape = parts[0].shape();
  if (axis >= shape.size()) detail::shape_error("concat", shape, shape);
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != shape.size()) detail::shape_error("concat", shape, p.shape());
    for (std::size_t d = 0; d < shape.size(); ++d) {
      if (d != axis && p.dim(d) != shape[d]) detail::shape_error("concat", shape, p.shape());
    }
    total += p.dim(axis);
  }
  shape[axis] = total;
  const auto view = detail::axis_view(shape, axis);

  auto out = std::make_shared<Node>();
  out->shape = shape;
  out->value.assign(shape_numel(shape), 0.0);
  bool any_grad = false;
  for (const auto& p : parts) any_grad = any_grad || p.requires_grad();
  out->requires_grad = grad_enabled() && any_grad;

  std::vector<std::size_t> widths;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.dim(axis) * view.inner;
    const auto src = p.data();
    for (std::size_t o = 0; o < view.outer; ++o) {
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(o * w), w,
                  out->value.begin() + static_cast<std::ptrdiff_t>(o * total * view.inner + offset));
    }
    widths.push_back(w);
    offset += w;
    if (out->requires_grad) out->parents.push_back(p.node());
  }
  if (out->requires_grad) {
    const std::size_t row = total * view.inner;
    const std::size_t outer = view.outer;
    out->backward = [widths, row, outer](Node& self) {
      std::size_t off = 0;
      for (std::size_t k = 0; k < self.parents.size(); ++k) {
        Node& p = *self.parents[k];
        const std::size_t w = widths[k];
        if (p.requires_grad) {
          auto& g = p.ensure_grad();
          for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t i = 0; i < w; ++i) g[o * w + i] += self.grad[o * row + off + i];
          }
        }
        off += w;
      }
    };
  }
  return Tensor(out);
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto view = detail::axis_view(a.shape(), axis);
  if (begin > end || end > view.extent) {
    throw Error(Errc::ShapeMismatch, "slice [" + std::to_string(begin) + "," + std::to_string(end) + ") of axis " +
                                         std::to_string(axis) + " in " + shape_string(a.shape()));
  }
  Shape shape = a.shape();
  shape[axis] = end - begin;
  auto out = make_output(shape, {&a});
  const std::size_t in_row = view.extent * view.inner;
  const std::size_t w = (end - begin) * view.inner;
  const std::size_t off = begin * view.inner;
  const auto src = a.data();
  for (std::size_t o = 0; o < view.outer; ++o) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(o * in_row + off), w,
                out->value.begin() + static_cast<std::ptrdiff_t>(o * w));
  }
  if (records(out)) {
    const std::size_t outer = view.outer;
    out->backward = [outer, in_row, w, off](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < w; ++i) g[o * in_row + off + i] += self.grad[o * w + i];
      }
    };
  }
  return Tensor(out);
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) detail::shape_error("reshape", a.shape(), shape);
  auto out = make_output(std::move(shape), {&a});
  std::copy(a.data().begin(), a.data().end(), out->value.begin());
  if (records(out)) {
    out->backward = [](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    };
  }
  return Tensor(out);
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw Error(Errc::ShapeMismatch, "transpose needs a matrix");
  const std::size_t r = a.dim(0), c = a.dim(1);
  auto out = make_output({c, r}, {&a});
  const auto x = a.data();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out->value[j * r + i] = x[i * c + j];
  }
  if (records(out)) {
    out->backward = [r, c](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
      }
    };
  }
  return Tensor(out);
}

Tensor embedding_lookup(const Tensor& table, std::span<const int> ids) {
  if (table.rank() != 2) throw Error(Errc::ShapeMismatch, "embedding table must be a matrix");
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw Error(Errc::IndexOutOfRange, "embedding id " + std::to_string(id) + " outside [0," +
                                             std::to_string(vocab) + ")");
    }
  }
  auto out = make_output({ids.size(), d}, {&table});
  const auto src = table.data();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(ids[r]) * d), d,
                out->value.begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  if (records(out)) {
    out->backward = [rows = std::vector<int>(ids.begin(), ids.end()), d](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t base = static_cast<std::size_t>(rows[r]) * d;
        for (std::size_t j = 0; j < d; ++j) g[base + j] += self.grad[r * d + j];
      }
    };
  }
  return Tensor(out);
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double y) { return y > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a, [](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double y) { return y * (1.0 - y); });
}

namespace {

// Softmax / log-softmax along `axis`; `log_space` selects the output.
Tensor softmax_impl(const Tensor& x, std::size_t axis, bool log_space) {
  const auto v = detail::axis_view(x.shape(), axis);
  auto out = make_output(x.shape(), {&x});
  const auto in = x.data();
  auto& y = out->value;
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.extent * v.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < v.extent; ++k) mx = std::max(mx, in[base + k * v.inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < v.extent; ++k) total += std::exp(in[base + k * v.inner] - mx);
      const double log_total = std::log(total);
      for (std::size_t k = 0; k < v.extent; ++k) {
        const double shifted = in[base + k * v.inner] - mx;
        y[base + k * v.inner] = log_space ? shifted - log_total : std::exp(shifted) / total;
      }
    }
  }
  if (records(out)) {
    out->backward = [v, log_space](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t i = 0; i < v.inner; ++i) {
          const std::size_t base = o * v.extent * v.inner + i;
          double acc = 0.0;
          for (std::size_t k = 0; k < v.extent; ++k) {
            const std::size_t idx = base + k * v.inner;
            acc += log_space ? self.grad[idx] : self.grad[idx] * self.value[idx];
          }
          for (std::size_t k = 0; k < v.extent; ++k) {
            const std::size_t idx = base + k * v.inner;
            if (log_space) {
              g[idx] += self.grad[idx] - std::exp(self.value[idx]) * acc;
            } else {
              g[idx] += self.value[idx] * (self.grad[idx] - acc);
            }
          }
        }
      }
    };
  }
  return Tensor(out);
}

}  // namespace

Tensor softmax(const Tensor& x, std::size_t axis) { return softmax_impl(x, axis, false); }
Tensor log_softmax(const Tensor& x, std::size_t axis) { return softmax_impl(x, axis, true); }

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t rows = x.rows(), d = x.cols();
  if (gain.numel() != d || bias.numel() != d) detail::shape_error("layer_norm", x.shape(), gain.shape());
  if (d < 2) throw Error(Errc::ShapeMismatch, "layer_norm needs at least 2 features");
  auto out = make_output(x.shape(), {&x, &gain, &bias});
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(rows);
  const auto in = x.data();
  const auto gv = gain.data();
  const auto bv = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mu) * inv_std[r];
      xhat[r * d + j] = h;
      out->value[r * d + j] = gv[j] * h + bv[j];
    }
  }
  if (records(out)) {
    out->backward = [rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
      Node& px = *self.parents[0];
      Node& pg = *self.parents[1];
      Node& pb = *self.parents[2];
      if (pg.requires_grad || pb.requires_grad) {
        auto& gg = pg.ensure_grad();
        auto& gb = pb.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < d; ++j) {
            gg[j] += self.grad[r * d + j] * xhat[r * d + j];
            gb[j] += self.grad[r * d + j];
          }
        }
      }
      if (px.requires_grad) {
        auto& gx = px.ensure_grad();
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t r = 0; r < rows; ++r) {
          double mean_dh = 0.0, mean_dh_h = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double dh = self.grad[r * d + j] * pg.value[j];
            mean_dh += dh;
            mean_dh_h += dh * xhat[r * d + j];
          }
          mean_dh *= inv_d;
          mean_dh_h *= inv_d;
          for (std::size_t j = 0; j < d; ++j) {
            const double dh = self.grad[r * d + j] * pg.value[j];
            gx[r * d + j] += inv_std[r] * (dh - mean_dh - xhat[r * d + j] * mean_dh_h);
          }
        }
      }
    };
  }
  return Tensor(out);
}

Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training) {
  if (!training || rate <= 0.0) return x;
  if (rate >= 1.0) throw Error(Errc::BadConfig, "dropout rate must be < 1");
  const double keep_scale = 1.0 / (1.0 - rate);
  // Four 16-bit lanes per draw.
  const auto drop_below = static_cast<std::uint64_t>(rate * 65536.0);
  std::vector<double> mask(x.numel());
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < mask.size(); ++i, bits >>= 16) {
    if (i % 4 == 0) bits = rng();
    mask[i] = (bits & 0xFFFF) >= drop_below ? keep_scale : 0.0;
  }
  auto out = make_output(x.shape(), {&x});
  const auto in = x.data();
  for (std::size_t i = 0; i < mask.size(); ++i) out->value[i] = in[i] * mask[i];
  if (records(out)) {
    out->backward = [mask = std::move(mask)](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
    };
  }
  return Tensor(out);
}

Tensor sum(const Tensor& a) {
  auto out = make_output({1}, {&a});
  double total = 0.0;
  for (double x : a.data()) total += x;
  out->value[0] = total;
  if (records(out)) {
    out->backward = [](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (double& x : g) x += self.grad[0];
    };
  }
  return Tensor(out);
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor kl_div(const Tensor& pred_log_probs, const Tensor& target_probs, std::span<const double> row_mask) {
  require_same_shape("kl_div", pred_log_probs, target_probs);
  const std::size_t rows = pred_log_probs.rows(), v = pred_log_probs.cols();
  if (!row_mask.empty() && row_mask.size() != rows) {
    throw Error(Errc::ShapeMismatch, "kl_div mask has " + std::to_string(row_mask.size()) + " entries for " +
                                         std::to_string(rows) + " rows");
  }
  const auto lq = pred_log_probs.data();
  const auto p = target_probs.data();
  std::vector<std::size_t> included;
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!row_mask.empty() && row_mask[r] == 0.0) continue;
    included.push_back(r);
    double row_sum = 0.0;
    for (std::size_t j = 0; j < v; ++j) {
      const double pj = p[r * v + j];
      row_sum += pj;
      if (pj > 0.0) total += pj * (std::log(pj) - lq[r * v + j]);
    }
    if (std::abs(row_sum - 1.0) > 1e-6) {
      throw Error(Errc::InvalidDistribution, "target row " + std::to_string(r) + " sums to " + std::to_string(row_sum));
    }
  }
  const double count = static_cast<double>(std::max<std::size_t>(included.size(), 1));
  auto out = make_output({1}, {&pred_log_probs});
  out->value[0] = included.empty() ? 0.0 : total / count;
  if (records(out)) {
    out->backward = [included = std::move(included), target = target_probs, v, count](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      const auto pv = target.data();
      const double up = self.grad[0] / count;
      for (std::size_t r : included) {
        for (std::size_t j = 0; j < v; ++j) g[r * v + j] -= up * pv[r * v + j];
      }
    };
  }
  return Tensor(out);
}

}  // namespace ocrfix
