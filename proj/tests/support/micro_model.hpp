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
#include <vector>

#include "ocrfix/model.hpp"
#include "ocrfix/tokenizer.hpp"
#include "ocrfix/trainer.hpp"
#include "support/test_support.hpp"

namespace ocrfix::testing {

// d_model 8, one layer each side, no dropout.
inline ModelConfig micro_config(Architecture arch) {
  ModelConfig cfg;
  cfg.arch = arch;
  cfg.d_token = 6;
  cfg.d_conf = 2;
  cfg.n_heads = 2;
  cfg.n_enc_layers = 1;
  cfg.n_dec_layers = 1;
  cfg.d_ff = 8;
  cfg.vocab_size = 10;
  cfg.dropout = 0.0;
  cfg.rnn_hidden = arch == Architecture::Transformer ? 0 : 5;
  cfg.init_seed = 3;
  return cfg;
}

// `size` random sentences; source lengths vary up to max_len, so the batch
// carries padding.
inline Batch micro_batch(std::uint64_t seed, std::size_t size, std::size_t vocab, std::size_t max_len = 4) {
  Rng rng(seed);
  std::vector<Example> examples(size);
  for (Example& ex : examples) {
    const std::size_t n = 1 + uniform_index(rng, max_len);
    const std::size_t m = 1 + uniform_index(rng, max_len);
    for (std::size_t i = 0; i < n; ++i) {
      ex.src_ids.push_back(static_cast<int>(kNumSpecials + uniform_index(rng, vocab - kNumSpecials)));
      ex.src_conf.push_back(static_cast<int>(uniform_index(rng, 101)));
    }
    for (std::size_t i = 0; i < m; ++i)
      ex.tgt_ids.push_back(static_cast<int>(kNumSpecials + uniform_index(rng, vocab - kNumSpecials)));
  }
  std::vector<const Example*> ptrs;
  for (const Example& ex : examples) ptrs.push_back(&ex);
  return make_batch(ptrs, 0);
}

// Label-smoothed loss gradient of every model parameter against central
// differences.
inline GradCheck check_model_gradients(Seq2SeqModel& model, const Batch& batch) {
  std::vector<Tensor> params;
  for (const auto& [name, t] : model.parameters()) params.push_back(t);
  const auto loss = [&] {
    Rng rng(0);
    return batch_loss(model, batch, 0.1, false, rng);
  };
  GradCheck result = check_gradients(loss, params);
  if (!result.worst.empty()) result.worst = model.parameters()[std::stoul(result.worst)].first;
  return result;
}

}  // namespace ocrfix::testing
