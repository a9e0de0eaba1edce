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

// Helpers shared by the operation translation units.

#include <initializer_list>

#include "ocrfix/error.hpp"
#include "ocrfix/tensor.hpp"

namespace ocrfix::detail {

// Creates the output node of an operation. Gradient plumbing is attached
// only when recording is enabled and some input requires a gradient.
std::shared_ptr<Node> make_output(Shape shape, std::initializer_list<const Tensor*> inputs);

inline bool records(const std::shared_ptr<Node>& out) { return out->requires_grad; }

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b);

// Contiguous view of a tensor as outer x axis x inner.
struct AxisView {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};
AxisView axis_view(const Shape& shape, std::size_t axis);

// C (m x n) = alpha * op(A) * op(B) + beta * C over row-major buffers.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
          std::size_t ldc);

}  // namespace ocrfix::detail
