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
#include <cblas.h>
#if defined(__GLIBC__)
#include <malloc.h>
#endif
#include <sstream>
#include <unordered_set>

#include "tensor_internal.hpp"

namespace ocrfix {

namespace {

thread_local bool g_grad_enabled = true;

// Activations are short-lived multi-megabyte buffers; keeping them on the
// heap instead of fresh mmap regions avoids a page fault per touched page.
bool tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
  return true;
}

[[maybe_unused]] const bool g_allocator_tuned = tune_allocator();

}  // namespace

std::size_t shape_numel(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto node = std::make_shared<detail::Node>();
  node->value.assign(shape_numel(shape), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw Error(Errc::ShapeMismatch, "shape " + shape_string(shape) + " holds " +
                                         std::to_string(shape_numel(shape)) + " values, got " +
                                         std::to_string(data.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from_data({1}, {value}, requires_grad); }

std::size_t Tensor::rows() const {
  const auto& s = node_->shape;
  return s.empty() ? 1 : numel() / s.back();
}

std::size_t Tensor::cols() const {
  const auto& s = node_->shape;
  return s.empty() ? 1 : s.back();
}

double Tensor::item() const {
  if (numel() != 1) throw Error(Errc::ShapeMismatch, "item() on " + shape_string(shape()));
  return node_->value[0];
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::clone(bool requires_grad) const {
  return from_data(node_->shape, node_->value, requires_grad);
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw Error(Errc::NonScalarLoss,
                "backward needs a scalar, got " + (loss.defined() ? shape_string(loss.shape()) : "undefined"));
  }
  detail::Node* root = loss.node().get();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (detail::Node* node : order) {
    if (!node->is_leaf()) node->grad.assign(node->value.size(), 0.0);
  }
  root->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (!node->is_leaf()) node->backward(*node);
  }
}

namespace detail {

std::shared_ptr<Node> make_output(Shape shape, std::initializer_list<const Tensor*> inputs) {
  auto out = std::make_shared<Node>();
  out->value.assign(shape_numel(shape), 0.0);
  out->shape = std::move(shape);
  if (!g_grad_enabled) return out;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) {
      out->requires_grad = true;
      break;
    }
  }
  if (out->requires_grad) {
    for (const Tensor* t : inputs) out->parents.push_back(t->node());
  }
  return out;
}

void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw Error(Errc::ShapeMismatch, std::string(op) + ": " + shape_string(a) + " vs " + shape_string(b));
}

AxisView axis_view(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw Error(Errc::ShapeMismatch, "axis " + std::to_string(axis) + " out of range for " + shape_string(shape));
  }
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
          std::size_t ldc) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] *= beta;
    }
    return;
  }
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
              static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), alpha, a, static_cast<int>(lda), b,
              static_cast<int>(ldb), beta, c, static_cast<int>(ldc));
}

}  // namespace detail

}  // namespace ocrfix
