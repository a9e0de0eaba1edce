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

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "ocrfix/corpus.hpp"
#include "ocrfix/eval.hpp"
#include "ocrfix/model.hpp"
#include "ocrfix/noiser.hpp"
#include "ocrfix/random.hpp"
#include "ocrfix/tensor.hpp"
#include "ocrfix/tokenizer.hpp"
#include "ocrfix/trainer.hpp"

namespace ocrfix {
namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  std::vector<double> data(rows * cols);
  for (double& v : data) v = uniform01(rng) - 0.5;
  return Tensor::from_data({rows, cols}, std::move(data), true);
}

const Dataset& pairs() {
  static const Dataset ds = corrupt_corpus(toy_sentences(400, 5), NoiseConfig{}, 6);
  return ds;
}

const BpeVocab& vocab() {
  static const BpeVocab v = train_vocab(pairs(), 300);
  return v;
}

void BM_MatmulForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Tensor a = random_matrix(n, n, rng);
  Tensor b = random_matrix(n, n, rng);
  for (auto _ : state) {
    Tensor c = matmul(a, b);
    backward(sum(c));
    benchmark::DoNotOptimize(a.grad().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * n * n * n));
}
BENCHMARK(BM_MatmulForwardBackward)->Arg(64)->Arg(128)->Arg(256);

void BM_MultiHeadAttention(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const std::size_t batch = 8, d = 64;
  Rng rng(2);
  Tensor q = random_matrix(batch * len, d, rng);
  Tensor k = random_matrix(batch * len, d, rng);
  Tensor v = random_matrix(batch * len, d, rng);
  const std::vector<std::size_t> lengths(batch, len);
  const AttentionGeometry geo{batch, len, len, 4};
  for (auto _ : state) {
    Tensor out = multi_head_attention(q, k, v, geo, lengths, false);
    backward(sum(out));
    benchmark::DoNotOptimize(q.grad().data());
  }
}
BENCHMARK(BM_MultiHeadAttention)->Arg(16)->Arg(64);

void BM_BpeEncode(benchmark::State& state) {
  const BpeVocab& v = vocab();
  std::size_t chars = 0;
  for (auto _ : state) {
    for (const auto& p : pairs().pairs) {
      const auto t = v.encode(std::string_view(p.noisy));
      chars += t.spans.size();
    }
  }
  benchmark::DoNotOptimize(chars);
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(pairs().size()));
}
BENCHMARK(BM_BpeEncode);

void BM_BpeTrain(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(train_vocab(pairs(), static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_BpeTrain)->Arg(300)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Levenshtein(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::u32string a, b;
  for (std::size_t i = 0; i < len; ++i) {
    a.push_back(U'a' + static_cast<char32_t>(uniform_index(rng, 4)));
    b.push_back(U'a' + static_cast<char32_t>(uniform_index(rng, 4)));
  }
  for (auto _ : state) benchmark::DoNotOptimize(levenshtein(a, b));
  state.SetComplexityN(static_cast<int64_t>(len));
}
BENCHMARK(BM_Levenshtein)->RangeMultiplier(4)->Range(16, 1024)->Complexity(benchmark::oNSquared);

void BM_Noise(benchmark::State& state) {
  const auto sentences = toy_sentences(200, 7);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(corrupt_corpus(sentences, NoiseConfig{}, ++seed));
  state.SetItemsProcessed(state.iterations() * 200);
}
BENCHMARK(BM_Noise)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  ModelConfig cfg;
  cfg.arch = static_cast<Architecture>(state.range(0));
  cfg.vocab_size = vocab().size();
  cfg.d_token = 48;
  cfg.d_conf = 16;
  cfg.d_ff = 128;
  cfg.dropout = 0.0;
  auto model = build_model(cfg);
  const ConfQuantizer quantizer(cfg.conf_vocab_size, cfg.conf_threshold);
  Dataset first;
  first.pairs.assign(pairs().pairs.begin(), pairs().pairs.begin() + 16);
  const auto examples = make_examples(first, vocab(), quantizer, ScoreReduction::Min);
  std::vector<const Example*> ptrs;
  for (const auto& e : examples) ptrs.push_back(&e);
  const Batch batch = make_batch(ptrs, quantizer.min_bucket());
  Rng rng(4);
  for (auto _ : state) {
    Tensor loss = batch_loss(*model, batch, 0.1, true, rng);
    backward(loss);
    for (auto& [name, p] : model->parameters()) p.zero_grad();
  }
}
BENCHMARK(BM_TrainStep)
    ->Arg(static_cast<int>(Architecture::Transformer))
    ->Arg(static_cast<int>(Architecture::Lstm))
    ->Arg(static_cast<int>(Architecture::Gru))
    ->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace ocrfix

BENCHMARK_MAIN();
