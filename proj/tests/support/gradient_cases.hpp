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

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ocrfix/tensor.hpp"
#include "support/test_support.hpp"

namespace ocrfix::testing {

struct GradientCase {
  std::string name;
  std::vector<Tensor> inputs;
  std::function<Tensor()> loss;
};

inline std::vector<GradientCase> gradient_cases(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradientCase> cases;
  auto add_case = [&](std::string name, std::vector<Tensor> inputs, std::function<Tensor(std::vector<Tensor>&)> op) {
    const Tensor probe = op(inputs);
    const Tensor w = random_tensor(probe.shape(), rng, -1.0, 1.0, false);
    auto shared = std::make_shared<std::vector<Tensor>>(inputs);
    cases.push_back({std::move(name), inputs, [shared, op, w] { return sum(mul(op(*shared), w)); }});
  };

  add_case("matmul", {random_tensor({3, 4}, rng), random_tensor({4, 5}, rng)},
           [](auto& t) { return matmul(t[0], t[1]); });
  add_case("add", {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}, [](auto& t) { return add(t[0], t[1]); });
  add_case("sub", {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}, [](auto& t) { return sub(t[0], t[1]); });
  add_case("mul", {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}, [](auto& t) { return mul(t[0], t[1]); });
  add_case("scale", {random_tensor({3, 4}, rng)}, [](auto& t) { return scale(t[0], -2.5); });
  add_case("add_bias", {random_tensor({3, 4}, rng), random_tensor({4}, rng)},
           [](auto& t) { return add_bias(t[0], t[1]); });
  add_case("concat_rows", {random_tensor({2, 3}, rng), random_tensor({4, 3}, rng)},
           [](auto& t) { return concat({t[0], t[1]}, 0); });
  add_case("concat_cols", {random_tensor({3, 2}, rng), random_tensor({3, 5}, rng)},
           [](auto& t) { return concat({t[0], t[1]}, 1); });
  add_case("slice_cols", {random_tensor({3, 6}, rng)}, [](auto& t) { return slice(t[0], 1, 1, 4); });
  add_case("slice_rows", {random_tensor({5, 2}, rng)}, [](auto& t) { return slice(t[0], 0, 2, 5); });
  add_case("reshape", {random_tensor({3, 4}, rng)}, [](auto& t) { return reshape(t[0], {6, 2}); });
  add_case("transpose", {random_tensor({3, 4}, rng)}, [](auto& t) { return transpose(t[0]); });
  add_case("embedding_lookup", {random_tensor({5, 3}, rng)}, [](auto& t) {
    const std::vector<int> ids{4, 0, 4, 2};
    return embedding_lookup(t[0], ids);
  });
  add_case("relu", {random_tensor({3, 4}, rng)}, [](auto& t) { return relu(t[0]); });
  add_case("tanh", {random_tensor({3, 4}, rng, -2.0, 2.0)}, [](auto& t) { return tanh(t[0]); });
  add_case("sigmoid", {random_tensor({3, 4}, rng, -3.0, 3.0)}, [](auto& t) { return sigmoid(t[0]); });
  add_case("softmax_cols", {random_tensor({3, 5}, rng, -2.0, 2.0)}, [](auto& t) { return softmax(t[0], 1); });
  add_case("softmax_rows", {random_tensor({4, 3}, rng, -2.0, 2.0)}, [](auto& t) { return softmax(t[0], 0); });
  add_case("log_softmax", {random_tensor({3, 5}, rng, -2.0, 2.0)}, [](auto& t) { return log_softmax(t[0], 1); });
  add_case("layer_norm", {random_tensor({3, 6}, rng), random_tensor({6}, rng, 0.5, 1.5), random_tensor({6}, rng)},
           [](auto& t) { return layer_norm(t[0], t[1], t[2]); });
  add_case("dropout", {random_tensor({4, 5}, rng)}, [](auto& t) {
    Rng mask_rng(99);
    return dropout(t[0], 0.3, mask_rng, true);
  });
  add_case("mean", {random_tensor({3, 4}, rng)}, [](auto& t) { return reshape(mean(t[0]), {1}); });
  {
    // KL target rows: random distributions; the second row is masked out.
    std::vector<double> p(3 * 4);
    for (std::size_t r = 0; r < 3; ++r) {
      double total = 0.0;
      for (std::size_t j = 0; j < 4; ++j) total += (p[r * 4 + j] = 0.1 + uniform01(rng));
      for (std::size_t j = 0; j < 4; ++j) p[r * 4 + j] /= total;
    }
    const Tensor target = Tensor::from_data({3, 4}, p);
    add_case("kl_div", {random_tensor({3, 4}, rng, -2.0, 2.0)}, [target](auto& t) {
      const std::vector<double> mask{1.0, 0.0, 1.0};
      return kl_div(log_softmax(t[0], 1), target, mask);
    });
  }
  {
    const AttentionGeometry geo{2, 3, 4, 2};
    add_case("multi_head_attention",
             {random_tensor({6, 4}, rng), random_tensor({8, 4}, rng), random_tensor({8, 4}, rng)},
             [geo](auto& t) {
               const std::vector<std::size_t> lengths{4, 2};
               return multi_head_attention(t[0], t[1], t[2], geo, lengths, false);
             });
    const AttentionGeometry self_geo{2, 3, 3, 2};
    add_case("causal_attention",
             {random_tensor({6, 4}, rng), random_tensor({6, 4}, rng), random_tensor({6, 4}, rng)},
             [self_geo](auto& t) {
               const std::vector<std::size_t> lengths{3, 2};
               return multi_head_attention(t[0], t[1], t[2], self_geo, lengths, true);
             });
  }
  add_case("additive_attention",
           {random_tensor({2, 3}, rng), random_tensor({8, 3}, rng), random_tensor({8, 5}, rng),
            random_tensor({3}, rng)},
           [](auto& t) {
             const std::vector<std::size_t> lengths{4, 3};
             return additive_attention(t[0], t[1], t[2], t[3], 4, lengths);
           });
  return cases;
}

}  // namespace ocrfix::testing
