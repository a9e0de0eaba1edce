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

#include "ocrfix/error.hpp"
#include "ocrfix/model.hpp"
#include "ocrfix/tokenizer.hpp"

namespace ocrfix {
namespace {

std::vector<AttentionMatrix> split_heads(const std::vector<double>& weights, const AttentionGeometry& geo) {
  std::vector<AttentionMatrix> heads(geo.heads);
  const std::size_t block = geo.query_len * geo.key_len;
  for (std::size_t h = 0; h < geo.heads; ++h) {
    heads[h].rows = geo.query_len;
    heads[h].cols = geo.key_len;
    heads[h].values.assign(weights.begin() + static_cast<std::ptrdiff_t>(h * block),
                           weights.begin() + static_cast<std::ptrdiff_t>((h + 1) * block));
  }
  return heads;
}

}  // namespace

TransformerCS::TransformerCS(ModelConfig cfg) : Seq2SeqModel(std::move(cfg)) {
  cfg_.arch = Architecture::Transformer;
  const std::size_t d = cfg_.d_model();
  enc_tok_embed_ = add_parameter("enc.tok_embed", {cfg_.vocab_size, cfg_.d_token}, Init::Normal);
  if (cfg_.d_conf > 0) {
    const ConfQuantizer quantizer(cfg_.conf_vocab_size, cfg_.conf_threshold);
    enc_conf_embed_ = add_parameter("enc.conf_embed", {quantizer.vocab_size(), cfg_.d_conf}, Init::Zeros);
    auto rows = enc_conf_embed_.mutable_data();
    for (int b = quantizer.min_bucket(); b <= quantizer.max_bucket(); ++b) {
      const double value = quantizer.representative(b);
      const std::size_t r = static_cast<std::size_t>(quantizer.row(b));
      std::fill(rows.begin() + static_cast<std::ptrdiff_t>(r * cfg_.d_conf),
                rows.begin() + static_cast<std::ptrdiff_t>((r + 1) * cfg_.d_conf), value);
    }
  }
  for (std::size_t l = 0; l < cfg_.n_enc_layers; ++l) {
    const std::string p = "enc." + std::to_string(l) + ".";
    EncoderLayer layer;
    layer.self = make_attention(p + "self");
    layer.norm1 = make_norm(p + "norm1", d);
    layer.ff = {make_linear(p + "ff.in", d, cfg_.d_ff), make_linear(p + "ff.out", cfg_.d_ff, d)};
    layer.norm2 = make_norm(p + "norm2", d);
    encoder_.push_back(std::move(layer));
  }
  dec_tok_embed_ = add_parameter("dec.tok_embed", {cfg_.vocab_size, d}, Init::Normal);
  for (std::size_t l = 0; l < cfg_.n_dec_layers; ++l) {
    const std::string p = "dec." + std::to_string(l) + ".";
    DecoderLayer layer;
    layer.self = make_attention(p + "self");
    layer.norm1 = make_norm(p + "norm1", d);
    layer.source = make_attention(p + "source");
    layer.norm2 = make_norm(p + "norm2", d);
    layer.ff = {make_linear(p + "ff.in", d, cfg_.d_ff), make_linear(p + "ff.out", cfg_.d_ff, d)};
    layer.norm3 = make_norm(p + "norm3", d);
    decoder_.push_back(std::move(layer));
  }
  out_proj_ = add_parameter("out.proj", {d, cfg_.vocab_size}, Init::Xavier);

  positional_.assign(cfg_.max_len * d, 0.0);
  for (std::size_t pos = 0; pos < cfg_.max_len; ++pos) {
    for (std::size_t i = 0; i < d; i += 2) {
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
      positional_[pos * d + i] = std::sin(angle);
      if (i + 1 < d) positional_[pos * d + i + 1] = std::cos(angle);
    }
  }
}

TransformerCS::Linear TransformerCS::make_linear(const std::string& name, std::size_t in, std::size_t out) {
  return {add_parameter(name + ".w", {in, out}, Init::Xavier), add_parameter(name + ".b", {out}, Init::Zeros)};
}

TransformerCS::Norm TransformerCS::make_norm(const std::string& name, std::size_t width) {
  return {add_parameter(name + ".gain", {width}, Init::Ones), add_parameter(name + ".bias", {width}, Init::Zeros)};
}

TransformerCS::AttentionBlock TransformerCS::make_attention(const std::string& name) {
  const std::size_t d = cfg_.d_model();
  return {make_linear(name + ".q", d, d), make_linear(name + ".k", d, d), make_linear(name + ".v", d, d),
          make_linear(name + ".o", d, d)};
}

Tensor TransformerCS::apply(const Linear& l, const Tensor& x) const { return add_bias(matmul(x, l.w), l.b); }

Tensor TransformerCS::attend(const AttentionBlock& block, const Tensor& queries, const Tensor& keys,
                             const AttentionGeometry& geo, std::span<const std::size_t> key_lengths, bool causal,
                             std::vector<double>* weights) const {
  const Tensor q = apply(block.q, queries);
  const Tensor k = apply(block.k, keys);
  const Tensor v = apply(block.v, keys);
  return apply(block.o, multi_head_attention(q, k, v, geo, key_lengths, causal, weights));
}

Tensor TransformerCS::feed_forward(const FeedForward& ff, const Tensor& x, bool training, Rng& rng) const {
  return apply(ff.out, dropout(relu(apply(ff.in, x)), cfg_.dropout, rng, training));
}

Tensor TransformerCS::positions(std::size_t batch, std::size_t len) const {
  const std::size_t d = cfg_.d_model();
  std::vector<double> data(batch * len * d);
  for (std::size_t b = 0; b < batch; ++b)
    std::copy(positional_.begin(), positional_.begin() + static_cast<std::ptrdiff_t>(len * d),
              data.begin() + static_cast<std::ptrdiff_t>(b * len * d));
  return Tensor::from_data({batch * len, d}, std::move(data));
}

Encoded TransformerCS::encode_impl(const Batch& batch, bool training, Rng& rng, AttentionTrace* trace) {
  const std::size_t B = batch.size, L = batch.src_len;
  if (L > cfg_.max_len) throw Error(Errc::TooLong, "source length " + std::to_string(L) + " exceeds max_len");
  Tensor x = embedding_lookup(enc_tok_embed_, batch.src_ids);
  if (cfg_.d_conf > 0) {
    const std::vector<int> rows = conf_rows(batch.src_conf);
    x = concat({x, embedding_lookup(enc_conf_embed_, rows)}, 1);
  }
  x = dropout(add(x, positions(B, L)), cfg_.dropout, rng, training);
  const AttentionGeometry geo{B, L, L, cfg_.n_heads};
  std::vector<double> weights;
  for (const EncoderLayer& layer : encoder_) {
    const Tensor a = attend(layer.self, x, x, geo, batch.src_lengths, false, trace ? &weights : nullptr);
    if (trace) trace->encoder_self.push_back(split_heads(weights, geo));
    x = layer_norm(add(x, dropout(a, cfg_.dropout, rng, training)), layer.norm1.gain, layer.norm1.bias);
    const Tensor f = feed_forward(layer.ff, x, training, rng);
    x = layer_norm(add(x, dropout(f, cfg_.dropout, rng, training)), layer.norm2.gain, layer.norm2.bias);
  }
  Encoded enc;
  enc.memory = x;
  enc.batch = B;
  enc.src_len = L;
  enc.src_lengths = batch.src_lengths;
  return enc;
}

Tensor TransformerCS::decode_impl(const Encoded& enc, const Batch& batch, bool training, Rng& rng,
                                  AttentionTrace* trace) {
  const std::size_t B = batch.size, T = batch.tgt_len;
  if (enc.batch != B) throw Error(Errc::ShapeMismatch, "encoder and decoder batch sizes differ");
  if (T > cfg_.max_len) throw Error(Errc::TooLong, "target length " + std::to_string(T) + " exceeds max_len");
  Tensor y = embedding_lookup(dec_tok_embed_, batch.tgt_in);
  y = dropout(add(y, positions(B, T)), cfg_.dropout, rng, training);
  const AttentionGeometry self_geo{B, T, T, cfg_.n_heads};
  const AttentionGeometry source_geo{B, T, enc.src_len, cfg_.n_heads};
  std::vector<double> weights;
  for (const DecoderLayer& layer : decoder_) {
    const Tensor s = attend(layer.self, y, y, self_geo, batch.tgt_lengths, true, trace ? &weights : nullptr);
    if (trace) trace->decoder_self.push_back(split_heads(weights, self_geo));
    y = layer_norm(add(y, dropout(s, cfg_.dropout, rng, training)), layer.norm1.gain, layer.norm1.bias);
    const Tensor c =
        attend(layer.source, y, enc.memory, source_geo, enc.src_lengths, false, trace ? &weights : nullptr);
    if (trace) trace->decoder_source.push_back(split_heads(weights, source_geo));
    y = layer_norm(add(y, dropout(c, cfg_.dropout, rng, training)), layer.norm2.gain, layer.norm2.bias);
    const Tensor f = feed_forward(layer.ff, y, training, rng);
    y = layer_norm(add(y, dropout(f, cfg_.dropout, rng, training)), layer.norm3.gain, layer.norm3.bias);
  }
  return log_softmax(matmul(y, out_proj_), 1);
}

Encoded TransformerCS::encode_batch(const Batch& batch, bool training, Rng& rng) {
  return encode_impl(batch, training, rng, nullptr);
}

Tensor TransformerCS::decode_batch(const Encoded& enc, const Batch& batch, bool training, Rng& rng) {
  return decode_impl(enc, batch, training, rng, nullptr);
}

std::vector<std::vector<int>> TransformerCS::greedy_decode(const Batch& batch, std::size_t max_out) {
  NoGradGuard no_grad;
  Rng rng(0);
  const Encoded enc = encode_batch(batch, false, rng);
  const std::size_t B = batch.size, d = cfg_.d_model();
  const std::size_t limit = std::min(max_out, cfg_.max_len);
  const AttentionGeometry source_geo{B, 1, enc.src_len, cfg_.n_heads};

  std::vector<Tensor> source_k, source_v;
  for (const DecoderLayer& layer : decoder_) {
    source_k.push_back(apply(layer.source.k, enc.memory));
    source_v.push_back(apply(layer.source.v, enc.memory));
  }
  // Self-attention keys and values of every emitted position, row b * limit + i.
  std::vector<std::vector<double>> cache_k(decoder_.size(), std::vector<double>(B * limit * d));
  std::vector<std::vector<double>> cache_v(decoder_.size(), std::vector<double>(B * limit * d));
  auto append = [&](std::vector<double>& cache, const Tensor& rows, std::size_t t) {
    for (std::size_t b = 0; b < B; ++b)
      std::copy_n(rows.data().begin() + static_cast<std::ptrdiff_t>(b * d), d,
                  cache.begin() + static_cast<std::ptrdiff_t>((b * limit + t) * d));
  };
  auto gather = [&](const std::vector<double>& cache, std::size_t len) {
    std::vector<double> out(B * len * d);
    for (std::size_t b = 0; b < B; ++b)
      std::copy_n(cache.begin() + static_cast<std::ptrdiff_t>(b * limit * d), len * d,
                  out.begin() + static_cast<std::ptrdiff_t>(b * len * d));
    return Tensor::from_data({B * len, d}, std::move(out));
  };

  std::vector<int> previous(B, kBosId);
  std::vector<std::vector<int>> out(B);
  std::vector<char> done(B, 0);
  std::size_t remaining = B;
  for (std::size_t t = 0; t < limit && remaining > 0; ++t) {
    std::vector<double> pe(B * d);
    for (std::size_t b = 0; b < B; ++b)
      std::copy_n(positional_.begin() + static_cast<std::ptrdiff_t>(t * d), d,
                  pe.begin() + static_cast<std::ptrdiff_t>(b * d));
    Tensor y = add(embedding_lookup(dec_tok_embed_, previous), Tensor::from_data({B, d}, std::move(pe)));
    const AttentionGeometry self_geo{B, 1, t + 1, cfg_.n_heads};
    const std::vector<std::size_t> self_lengths(B, t + 1);
    for (std::size_t l = 0; l < decoder_.size(); ++l) {
      const DecoderLayer& layer = decoder_[l];
      append(cache_k[l], apply(layer.self.k, y), t);
      append(cache_v[l], apply(layer.self.v, y), t);
      const Tensor s = apply(layer.self.o, multi_head_attention(apply(layer.self.q, y), gather(cache_k[l], t + 1),
                                                                gather(cache_v[l], t + 1), self_geo, self_lengths,
                                                                false));
      y = layer_norm(add(y, s), layer.norm1.gain, layer.norm1.bias);
      const Tensor c = apply(layer.source.o, multi_head_attention(apply(layer.source.q, y), source_k[l], source_v[l],
                                                                  source_geo, enc.src_lengths, false));
      y = layer_norm(add(y, c), layer.norm2.gain, layer.norm2.bias);
      y = layer_norm(add(y, feed_forward(layer.ff, y, false, rng)), layer.norm3.gain, layer.norm3.bias);
    }
    const Tensor logits = matmul(y, out_proj_);
    const std::size_t vocab = logits.cols();
    for (std::size_t b = 0; b < B; ++b) {
      int next = kEosId;
      if (!done[b]) {
        const auto row = logits.data().subspan(b * vocab, vocab);
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

AttentionTrace TransformerCS::attention_trace(std::span<const int> tokens, std::span<const int> conf_buckets,
                                              std::span<const int> target_ids) {
  check_source(tokens, conf_buckets);
  Example ex{std::vector<int>(tokens.begin(), tokens.end()), std::vector<int>(conf_buckets.begin(), conf_buckets.end()),
             std::vector<int>(target_ids.begin(), target_ids.end())};
  const Example* ptr = &ex;
  const Batch batch = make_batch(std::span(&ptr, 1), conf_buckets.front());
  NoGradGuard no_grad;
  Rng rng(0);
  AttentionTrace trace;
  const Encoded enc = encode_impl(batch, false, rng, &trace);
  decode_impl(enc, batch, false, rng, &trace);
  return trace;
}

}  // namespace ocrfix
