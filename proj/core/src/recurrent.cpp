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
#include <tuple>

#include "ocrfix/error.hpp"
#include "ocrfix/model.hpp"
#include "ocrfix/tokenizer.hpp"

namespace ocrfix {
namespace {

std::size_t embedding_parameters(const ModelConfig& cfg) {
  std::size_t n = cfg.vocab_size * cfg.d_token + cfg.vocab_size * cfg.d_model();
  if (cfg.d_conf > 0) n += static_cast<std::size_t>(cfg.conf_vocab_size) * cfg.d_conf;
  return n;
}

std::size_t cell_parameters(std::size_t in, std::size_t hidden, std::size_t gates) {
  return (in + hidden) * gates * hidden + 2 * gates * hidden;
}

// Stacks per-step (batch, width) tensors into (batch * steps, width), row
// b * steps + t.
Tensor stack_steps(std::span<const Tensor> steps) {
  const std::size_t B = steps.front().rows(), W = steps.front().cols();
  return reshape(concat(steps, 1), {B * steps.size(), W});
}

std::vector<int> step_rows(std::size_t batch, std::size_t len, std::size_t t) {
  std::vector<int> ids(batch);
  for (std::size_t b = 0; b < batch; ++b) ids[b] = static_cast<int>(b * len + t);
  return ids;
}

}  // namespace

struct RecurrentSeq2Seq::DecoderContext {
  const Encoded& enc;
  Tensor keys_proj;
};

std::size_t RecurrentSeq2Seq::count_parameters(const ModelConfig& cfg, std::size_t hidden) {
  const std::size_t gates = cfg.arch == Architecture::Gru ? 3 : 4;
  std::size_t n = embedding_parameters(cfg);
  n += cell_parameters(cfg.d_model(), hidden, gates) + cell_parameters(hidden, hidden, gates);
  n += cell_parameters(cfg.d_model() + hidden, hidden, gates) + cell_parameters(hidden, hidden, gates);
  n += 2 * hidden * hidden + hidden;
  n += 2 * hidden * cfg.vocab_size;
  return n;
}

RecurrentSeq2Seq::RecurrentSeq2Seq(ModelConfig cfg) : Seq2SeqModel(std::move(cfg)) {
  if (cfg_.arch == Architecture::Transformer) throw Error(Errc::BadConfig, "recurrent model needs lstm or gru");
  gates_ = cfg_.arch == Architecture::Gru ? 3 : 4;
  hidden_ = cfg_.rnn_hidden > 0 ? cfg_.rnn_hidden : parity_hidden_size(cfg_);
  cfg_.rnn_hidden = hidden_;

  enc_tok_embed_ = add_parameter("enc.tok_embed", {cfg_.vocab_size, cfg_.d_token}, Init::Normal);
  if (cfg_.d_conf > 0) {
    const ConfQuantizer quantizer(cfg_.conf_vocab_size, cfg_.conf_threshold);
    enc_conf_embed_ = add_parameter("enc.conf_embed", {quantizer.vocab_size(), cfg_.d_conf}, Init::Zeros);
    auto rows = enc_conf_embed_.mutable_data();
    for (int b = quantizer.min_bucket(); b <= quantizer.max_bucket(); ++b) {
      const std::size_t r = static_cast<std::size_t>(quantizer.row(b));
      std::fill(rows.begin() + static_cast<std::ptrdiff_t>(r * cfg_.d_conf),
                rows.begin() + static_cast<std::ptrdiff_t>((r + 1) * cfg_.d_conf), quantizer.representative(b));
    }
  }
  dec_tok_embed_ = add_parameter("dec.tok_embed", {cfg_.vocab_size, cfg_.d_model()}, Init::Normal);
  encoder_.push_back(make_cell("enc.0", cfg_.d_model()));
  encoder_.push_back(make_cell("enc.1", hidden_));
  decoder_.push_back(make_cell("dec.0", cfg_.d_model() + hidden_));
  decoder_.push_back(make_cell("dec.1", hidden_));
  att_query_ = add_parameter("att.query", {hidden_, hidden_}, Init::Xavier);
  att_key_ = add_parameter("att.key", {hidden_, hidden_}, Init::Xavier);
  att_energy_ = add_parameter("att.energy", {hidden_}, Init::Normal, 1.0 / std::sqrt(static_cast<double>(hidden_)));
  out_proj_ = add_parameter("out.proj", {2 * hidden_, cfg_.vocab_size}, Init::Xavier);
}

RecurrentSeq2Seq::Cell RecurrentSeq2Seq::make_cell(const std::string& name, std::size_t in) {
  Cell cell{add_parameter(name + ".w_ih", {in, gates_ * hidden_}, Init::Xavier),
            add_parameter(name + ".w_hh", {hidden_, gates_ * hidden_}, Init::Xavier),
            add_parameter(name + ".b_ih", {gates_ * hidden_}, Init::Zeros),
            add_parameter(name + ".b_hh", {gates_ * hidden_}, Init::Zeros)};
  if (gates_ == 4) {
    auto b = cell.b_ih.mutable_data();
    std::fill(b.begin() + static_cast<std::ptrdiff_t>(hidden_), b.begin() + static_cast<std::ptrdiff_t>(2 * hidden_),
              1.0);
  }
  return cell;
}

std::pair<Tensor, Tensor> RecurrentSeq2Seq::step(const Cell& cell, const Tensor& x, const Tensor& h,
                                                 const Tensor& c) const {
  const std::size_t H = hidden_;
  const Tensor gi = add_bias(matmul(x, cell.w_ih), cell.b_ih);
  const Tensor gh = add_bias(matmul(h, cell.w_hh), cell.b_hh);
  if (gates_ == 4) {
    const Tensor z = add(gi, gh);
    const Tensor i = sigmoid(slice(z, 1, 0, H));
    const Tensor f = sigmoid(slice(z, 1, H, 2 * H));
    const Tensor g = tanh(slice(z, 1, 2 * H, 3 * H));
    const Tensor o = sigmoid(slice(z, 1, 3 * H, 4 * H));
    const Tensor c2 = add(mul(f, c), mul(i, g));
    return {mul(o, tanh(c2)), c2};
  }
  const Tensor r = sigmoid(add(slice(gi, 1, 0, H), slice(gh, 1, 0, H)));
  const Tensor z = sigmoid(add(slice(gi, 1, H, 2 * H), slice(gh, 1, H, 2 * H)));
  const Tensor n = tanh(add(slice(gi, 1, 2 * H, 3 * H), mul(r, slice(gh, 1, 2 * H, 3 * H))));
  return {add(n, mul(z, sub(h, n))), Tensor{}};
}

Encoded RecurrentSeq2Seq::encode_batch(const Batch& batch, bool training, Rng& rng) {
  const std::size_t B = batch.size, L = batch.src_len;
  if (L > cfg_.max_len) throw Error(Errc::TooLong, "source length " + std::to_string(L) + " exceeds max_len");
  Tensor x = embedding_lookup(enc_tok_embed_, batch.src_ids);
  if (cfg_.d_conf > 0) {
    const std::vector<int> rows = conf_rows(batch.src_conf);
    x = concat({x, embedding_lookup(enc_conf_embed_, rows)}, 1);
  }
  x = dropout(x, cfg_.dropout, rng, training);
  std::vector<Tensor> inputs(L);
  for (std::size_t t = 0; t < L; ++t) inputs[t] = embedding_lookup(x, step_rows(B, L, t));

  std::vector<int> last(B);
  for (std::size_t b = 0; b < B; ++b) last[b] = static_cast<int>(b * L + batch.src_lengths[b] - 1);

  Encoded enc;
  enc.batch = B;
  enc.src_len = L;
  enc.src_lengths = batch.src_lengths;
  for (std::size_t l = 0; l < kLayers; ++l) {
    Tensor h = Tensor::zeros({B, hidden_});
    Tensor c = gates_ == 4 ? Tensor::zeros({B, hidden_}) : Tensor{};
    std::vector<Tensor> hs(L), cs;
    if (gates_ == 4) cs.resize(L);
    for (std::size_t t = 0; t < L; ++t) {
      std::tie(h, c) = step(encoder_[l], inputs[t], h, c);
      hs[t] = h;
      if (gates_ == 4) cs[t] = c;
    }
    const Tensor stacked = stack_steps(hs);
    enc.final_h.push_back(embedding_lookup(stacked, last));
    enc.final_c.push_back(gates_ == 4 ? embedding_lookup(stack_steps(cs), last) : Tensor{});
    if (l + 1 == kLayers) {
      enc.memory = stacked;
    } else {
      for (std::size_t t = 0; t < L; ++t) inputs[t] = dropout(hs[t], cfg_.dropout, rng, training);
    }
  }
  return enc;
}

Tensor RecurrentSeq2Seq::decoder_step(const DecoderContext& ctx, const Tensor& embedded, State& state,
                                      bool training, Rng& rng) const {
  const Tensor query = matmul(state.h.back(), att_query_);
  const Tensor context = additive_attention(query, ctx.keys_proj, ctx.enc.memory, att_energy_, ctx.enc.src_len,
                                            ctx.enc.src_lengths);
  Tensor input = concat({embedded, context}, 1);
  for (std::size_t l = 0; l < kLayers; ++l) {
    std::tie(state.h[l], state.c[l]) = step(decoder_[l], input, state.h[l], state.c[l]);
    input = dropout(state.h[l], cfg_.dropout, rng, training);
  }
  return concat({input, context}, 1);
}

Tensor RecurrentSeq2Seq::decode_batch(const Encoded& enc, const Batch& batch, bool training, Rng& rng) {
  const std::size_t B = batch.size, T = batch.tgt_len;
  if (enc.batch != B) throw Error(Errc::ShapeMismatch, "encoder and decoder batch sizes differ");
  if (T > cfg_.max_len) throw Error(Errc::TooLong, "target length " + std::to_string(T) + " exceeds max_len");
  const DecoderContext ctx{enc, matmul(enc.memory, att_key_)};
  State state{enc.final_h, enc.final_c};
  const Tensor embedded = dropout(embedding_lookup(dec_tok_embed_, batch.tgt_in), cfg_.dropout, rng, training);
  std::vector<Tensor> features(T);
  for (std::size_t t = 0; t < T; ++t)
    features[t] = decoder_step(ctx, embedding_lookup(embedded, step_rows(B, T, t)), state, training, rng);
  return log_softmax(matmul(stack_steps(features), out_proj_), 1);
}

std::vector<std::vector<int>> RecurrentSeq2Seq::greedy_decode(const Batch& batch, std::size_t max_out) {
  NoGradGuard no_grad;
  Rng rng(0);
  const Encoded enc = encode_batch(batch, false, rng);
  const DecoderContext ctx{enc, matmul(enc.memory, att_key_)};
  State state{enc.final_h, enc.final_c};
  const std::size_t limit = std::min(max_out, cfg_.max_len);
  std::vector<int> previous(batch.size, kBosId);
  std::vector<std::vector<int>> out(batch.size);
  std::vector<char> done(batch.size, 0);
  std::size_t remaining = batch.size;
  for (std::size_t t = 0; t < limit && remaining > 0; ++t) {
    const Tensor features = decoder_step(ctx, embedding_lookup(dec_tok_embed_, previous), state, false, rng);
    const Tensor log_probs = log_softmax(matmul(features, out_proj_), 1);
    const std::size_t vocab = log_probs.cols();
    for (std::size_t b = 0; b < batch.size; ++b) {
      int next = kEosId;
      if (!done[b]) {
        const auto row = log_probs.data().subspan(b * vocab, vocab);
        next = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
        if (next == kEosId) {
          done[b] = 1;
          --remaining;
        } else {
          out[b].push_back(next);
        }
      }
      previous[b] = next;
    }
  }
  return out;
}

}  // namespace ocrfix
