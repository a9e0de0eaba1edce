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

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ocrfix/random.hpp"

namespace ocrfix {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

namespace detail {

// A value in the computation graph. Nodes created while gradient recording
// is enabled keep their parents alive and a closure that pushes the node's
// gradient into them.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  bool is_leaf() const noexcept { return !backward; }
  std::vector<double>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

// Dense row-major double tensor with shared (handle) semantics: copying a
// Tensor aliases the same node. Use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->value.size(); }
  // Leading extent when viewed as a matrix over the last axis.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return node_->value; }
  std::span<double> mutable_data() { return node_->value; }
  double item() const;
  double operator[](std::size_t i) const { return node_->value[i]; }
  double at(std::size_t row, std::size_t col) const { return node_->value[row * cols() + col]; }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad();

  Tensor clone(bool requires_grad = false) const;
  bool same_node(const Tensor& other) const noexcept { return node_ == other.node_; }

  const std::shared_ptr<detail::Node>& node() const noexcept { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Gradient recording is on by default, per thread.
bool grad_enabled() noexcept;

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Reverse-mode sweep from a scalar. Visits every reachable node that
// requires a gradient once, in reverse topological order. Leaf gradients
// accumulate across calls; intermediate gradients are recomputed.
void backward(const Tensor& loss);

// ---- operations ---------------------------------------------------------
// Shapes are explicit: nothing broadcasts implicitly. Mismatches throw
// Error(ShapeMismatch).

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// x (.., n) + bias (n) on every row.
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a);
// Rows of a (V, d) table; also serves as a differentiable row gather.
Tensor embedding_lookup(const Tensor& table, std::span<const int> ids);
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);
// Normalizes over the last axis; eps sits inside the square root.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
// Inverted dropout; identity when !training or rate == 0.
Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Mean over rows with row_mask != 0 of sum_x P(x) (log P(x) - log Q(x)),
// with 0 log 0 = 0. `target_probs` is a constant; each included row must sum
// to 1 within 1e-6 (InvalidDistribution otherwise).
Tensor kl_div(const Tensor& pred_log_probs, const Tensor& target_probs, std::span<const double> row_mask = {});

// Batched scaled dot-product attention over packed rows.
struct AttentionGeometry {
  std::size_t batch = 1;
  std::size_t query_len = 1;
  std::size_t key_len = 1;
  std::size_t heads = 1;
};

// q: (batch*query_len, d), k/v: (batch*key_len, d), d divisible by heads.
// Keys at positions >= key_lengths[b] are masked, as are keys j > i when
// `causal`. When `weights_out` is non-null it receives the attention
// probabilities laid out [batch][head][query][key].
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionGeometry& geo,
                            std::span<const std::size_t> key_lengths, bool causal,
                            std::vector<double>* weights_out = nullptr);

// Additive (Bahdanau) attention for one decoder step.
// query_proj: (batch, a), keys_proj: (batch*key_len, a), values: (batch*key_len, d),
// energy: (a). score_bj = energy . tanh(query_proj_b + keys_proj_bj).
// Returns contexts (batch, d).
Tensor additive_attention(const Tensor& query_proj, const Tensor& keys_proj, const Tensor& values,
                          const Tensor& energy, std::size_t key_len, std::span<const std::size_t> key_lengths,
                          std::vector<double>* weights_out = nullptr);

// ---- checkpoints ----------------------------------------------------------

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// Binary container: "OCRFXCKP", u32 version, u32 count, then per tensor
// u32 name length, name bytes, u32 rank, u64 extents, little-endian doubles.
void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::filesystem::path& path);

}  // namespace ocrfix
