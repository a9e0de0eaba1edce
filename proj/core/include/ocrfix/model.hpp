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
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ocrfix/random.hpp"
#include "ocrfix/tensor.hpp"

namespace ocrfix {

enum class Architecture { Transformer, Lstm, Gru };

std::string_view architecture_name(Architecture arch) noexcept;
Architecture parse_architecture(std::string_view name);

struct ModelConfig {
  Architecture arch = Architecture::Transformer;
  // Encoder inputs are concat(token embedding, confidence embedding), so
  // d_model = d_token + d_conf. d_conf == 0 disables the confidence channel.
  std::size_t d_token = 112;
  std::size_t d_conf = 16;
  std::size_t n_heads = 4;
  std::size_t n_enc_layers = 3;
  std::size_t n_dec_layers = 3;
  std::size_t d_ff = 256;
  std::size_t max_len = 512;
  std::size_t vocab_size = 0;
  int conf_vocab_size = 101;  // 101, 5 or 2
  double conf_threshold = 0.8;
  double dropout = 0.1;
  // Recurrent baselines only; 0 picks the width whose parameter count is
  // closest to the transformer built from the same config.
  std::size_t rnn_hidden = 0;
  std::uint64_t init_seed = 1;

  std::size_t d_model() const noexcept { return d_token + d_conf; }
  void validate() const;

  // Sidecar "key = value" form stored next to checkpoints.
  std::string to_text() const;
  static ModelConfig from_text(std::string_view text);
};

// A padded mini-batch. Rows are laid out sequence-major: row b * len + t.
struct Batch {
  std::size_t size = 0;
  std::size_t src_len = 0;
  std::size_t tgt_len = 0;
  std::vector<int> src_ids;
  std::vector<int> src_conf;  // confidence buckets (not rows)
  std::vector<std::size_t> src_lengths;
  std::vector<int> tgt_in;   // BOS y1 .. yn
  std::vector<int> tgt_out;  // y1 .. yn EOS
  std::vector<std::size_t> tgt_lengths;
};

// One tokenized training example.
struct Example {
  std::vector<int> src_ids;
  std::vector<int> src_conf;
  std::vector<int> tgt_ids;  // without BOS/EOS
};

// Pads `examples` into a batch; `pad_bucket` fills padded confidence slots.
Batch make_batch(std::span<const Example* const> examples, int pad_bucket);

// Encoder output for a batch.
struct Encoded {
  Tensor memory;  // (batch * src_len, width)
  std::size_t batch = 0;
  std::size_t src_len = 0;
  std::vector<std::size_t> src_lengths;
  // Recurrent baselines: final (h, c) per encoder layer, each (batch, hidden).
  std::vector<Tensor> final_h;
  std::vector<Tensor> final_c;
};

struct AttentionMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

// Attention probabilities for one sentence. layers[l][h] is layer l, head h.
struct AttentionTrace {
  using Layers = std::vector<std::vector<AttentionMatrix>>;
  Layers encoder_self;
  Layers decoder_self;
  Layers decoder_source;
};

// Element-wise average of the heads of one layer (1-based layer index).
AttentionMatrix mean_heads(const AttentionTrace::Layers& layers, std::size_t layer);

class Seq2SeqModel {
 public:
  explicit Seq2SeqModel(ModelConfig cfg);
  virtual ~Seq2SeqModel() = default;
  Seq2SeqModel(const Seq2SeqModel&) = delete;
  Seq2SeqModel& operator=(const Seq2SeqModel&) = delete;

  const ModelConfig& config() const noexcept { return cfg_; }

  virtual Encoded encode_batch(const Batch& batch, bool training, Rng& rng) = 0;
  // Teacher-forced next-token log-probabilities, (batch * tgt_len, vocab).
  virtual Tensor decode_batch(const Encoded& enc, const Batch& batch, bool training, Rng& rng) = 0;
  Tensor forward(const Batch& batch, bool training, Rng& rng);

  // Argmax decoding until EOS or max_out tokens; returned sequences
  // exclude BOS and EOS.
  virtual std::vector<std::vector<int>> greedy_decode(const Batch& batch, std::size_t max_out);

  // Single-sentence conveniences over the batched interface.
  Encoded encode(std::span<const int> tokens, std::span<const int> conf_buckets);
  std::vector<double> decode_step(const Encoded& enc, std::span<const int> prefix);
  std::vector<int> greedy_decode(std::span<const int> tokens, std::span<const int> conf_buckets,
                                 std::size_t max_out);

  NamedTensors& parameters() noexcept { return params_; }
  const NamedTensors& parameters() const noexcept { return params_; }
  Tensor parameter(std::string_view name) const;
  std::size_t parameter_count() const noexcept;
  // Parameters whose name contains "conf_embed".
  std::size_t confidence_parameter_count() const noexcept;

  // Copies values from `tensors` by name; every parameter must be present
  // with a matching shape.
  void load_parameters(const NamedTensors& tensors);
  void save(const std::filesystem::path& checkpoint) const;

 protected:
  enum class Init { Xavier, Normal, Zeros, Ones };
  Tensor add_parameter(std::string name, Shape shape, Init init, double scale = 1.0);
  void check_source(std::span<const int> tokens, std::span<const int> conf_buckets) const;
  // Confidence buckets -> embedding rows.
  std::vector<int> conf_rows(std::span<const int> buckets) const;

  ModelConfig cfg_;
  NamedTensors params_;
  Rng init_rng_;
};

class TransformerCS final : public Seq2SeqModel {
 public:
  explicit TransformerCS(ModelConfig cfg);

  Encoded encode_batch(const Batch& batch, bool training, Rng& rng) override;
  Tensor decode_batch(const Encoded& enc, const Batch& batch, bool training, Rng& rng) override;
  // Incremental decoding with cached decoder keys and values.
  std::vector<std::vector<int>> greedy_decode(const Batch& batch, std::size_t max_out) override;
  using Seq2SeqModel::greedy_decode;

  // Teacher-forced pass over one sentence that records every attention map.
  AttentionTrace attention_trace(std::span<const int> tokens, std::span<const int> conf_buckets,
                                 std::span<const int> target_ids);

 private:
  struct Linear {
    Tensor w, b;
  };
  struct AttentionBlock {
    Linear q, k, v, o;
  };
  struct Norm {
    Tensor gain, bias;
  };
  struct FeedForward {
    Linear in, out;
  };
  struct EncoderLayer {
    AttentionBlock self;
    Norm norm1, norm2;
    FeedForward ff;
  };
  struct DecoderLayer {
    AttentionBlock self, source;
    Norm norm1, norm2, norm3;
    FeedForward ff;
  };

  Linear make_linear(const std::string& name, std::size_t in, std::size_t out);
  Norm make_norm(const std::string& name, std::size_t width);
  AttentionBlock make_attention(const std::string& name);
  Tensor apply(const Linear& l, const Tensor& x) const;
  Tensor attend(const AttentionBlock& block, const Tensor& queries, const Tensor& keys, const AttentionGeometry& geo,
                std::span<const std::size_t> key_lengths, bool causal, std::vector<double>* weights) const;
  Tensor feed_forward(const FeedForward& ff, const Tensor& x, bool training, Rng& rng) const;
  Tensor positions(std::size_t batch, std::size_t len) const;

  Encoded encode_impl(const Batch& batch, bool training, Rng& rng, AttentionTrace* trace);
  Tensor decode_impl(const Encoded& enc, const Batch& batch, bool training, Rng& rng, AttentionTrace* trace);

  Tensor enc_tok_embed_, enc_conf_embed_, dec_tok_embed_, out_proj_;
  std::vector<EncoderLayer> encoder_;
  std::vector<DecoderLayer> decoder_;
  std::vector<double> positional_;  // max_len x d_model, sinusoidal
};

// Two-layer LSTM or GRU encoder/decoder with additive attention from the
// decoder onto the encoder states. Takes the same inputs as TransformerCS.
class RecurrentSeq2Seq final : public Seq2SeqModel {
 public:
  explicit RecurrentSeq2Seq(ModelConfig cfg);

  static constexpr std::size_t kLayers = 2;

  std::size_t hidden() const noexcept { return hidden_; }
  Encoded encode_batch(const Batch& batch, bool training, Rng& rng) override;
  Tensor decode_batch(const Encoded& enc, const Batch& batch, bool training, Rng& rng) override;
  std::vector<std::vector<int>> greedy_decode(const Batch& batch, std::size_t max_out) override;
  using Seq2SeqModel::greedy_decode;

  // Parameter count of a baseline with hidden width `hidden` under `cfg`.
  static std::size_t count_parameters(const ModelConfig& cfg, std::size_t hidden);

 private:
  struct Cell {
    Tensor w_ih, w_hh, b_ih, b_hh;
  };
  struct State {
    std::vector<Tensor> h, c;
  };
  struct DecoderContext;

  Cell make_cell(const std::string& name, std::size_t in);
  std::pair<Tensor, Tensor> step(const Cell& cell, const Tensor& x, const Tensor& h, const Tensor& c) const;
  // One decoder step: consumes token embeddings (batch, d_model), updates
  // `state` and returns the output features concat(h_top, context).
  Tensor decoder_step(const DecoderContext& ctx, const Tensor& embedded, State& state, bool training,
                      Rng& rng) const;

  std::size_t hidden_ = 0;
  std::size_t gates_ = 4;
  Tensor enc_tok_embed_, enc_conf_embed_, dec_tok_embed_;
  std::vector<Cell> encoder_, decoder_;
  Tensor att_query_, att_key_, att_energy_, out_proj_;
};

// Width for a recurrent baseline whose parameter count is closest to the
// transformer built from `cfg`.
std::size_t parity_hidden_size(const ModelConfig& cfg);

std::unique_ptr<Seq2SeqModel> build_model(const ModelConfig& cfg);
std::unique_ptr<Seq2SeqModel> build_baseline(Architecture kind, ModelConfig cfg);

// Loads a checkpoint plus its sidecar config (checkpoint path + ".cfg").
std::unique_ptr<Seq2SeqModel> load_model(const std::filesystem::path& checkpoint);

}  // namespace ocrfix
