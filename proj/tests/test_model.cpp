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

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "ocrfix/error.hpp"
#include "ocrfix/model.hpp"
#include "ocrfix/tokenizer.hpp"
#include "support/micro_model.hpp"

namespace ocrfix {
namespace {

using testing::micro_batch;
using testing::micro_config;

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.d_token = 12;
  cfg.d_conf = 4;
  cfg.n_heads = 4;
  cfg.n_enc_layers = 3;
  cfg.n_dec_layers = 3;
  cfg.d_ff = 24;
  cfg.vocab_size = 20;
  cfg.dropout = 0.0;
  cfg.init_seed = 17;
  return cfg;
}

bool rows_differ(const Tensor& a, std::size_t ra, const Tensor& b, std::size_t rb) {
  for (std::size_t c = 0; c < a.cols(); ++c)
    if (a.at(ra, c) != b.at(rb, c)) return true;
  return false;
}

TEST(ModelConfig, TextRoundTrip) {
  ModelConfig cfg = small_config();
  cfg.arch = Architecture::Gru;
  cfg.conf_threshold = 0.7;
  cfg.rnn_hidden = 9;
  const ModelConfig back = ModelConfig::from_text(cfg.to_text());
  EXPECT_EQ(back.to_text(), cfg.to_text());
  EXPECT_EQ(back.arch, Architecture::Gru);
  EXPECT_EQ(back.conf_threshold, 0.7);
}

TEST(ModelConfig, RejectsBadValues) {
  ModelConfig cfg = small_config();
  cfg.n_heads = 3;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = small_config();
  cfg.conf_vocab_size = 7;
  EXPECT_THROW(cfg.validate(), Error);
  EXPECT_THROW((void)ModelConfig::from_text("d_model = 5\n"), Error);
}

TEST(Transformer, EncodeShapeContract) {
  TransformerCS model(small_config());
  const std::vector<int> tokens{5};
  const std::vector<int> conf{80};
  const Encoded z = model.encode(tokens, conf);
  EXPECT_EQ(z.memory.shape(), (Shape{1, 16}));
}

TEST(Transformer, EncodeValidatesInputs) {
  ModelConfig cfg = small_config();
  cfg.max_len = 4;
  TransformerCS model(cfg);
  const std::vector<int> tokens{5, 6, 7};
  const std::vector<int> conf{80, 80};
  try {
    (void)model.encode(tokens, conf);
    FAIL() << "expected LengthMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::LengthMismatch);
  }
  const std::vector<int> long_tokens(5, 6), long_conf(5, 50);
  try {
    (void)model.encode(long_tokens, long_conf);
    FAIL() << "expected TooLong";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooLong);
  }
  const std::vector<int> bad_conf{80, 101, 3};
  EXPECT_THROW((void)model.encode(tokens, bad_conf), Error);
}

TEST(Transformer, PositionsMatter) {
  TransformerCS model(small_config());
  const std::vector<int> ab{5, 6}, ba{6, 5}, conf{90, 90};
  const Encoded zab = model.encode(ab, conf);
  const Encoded zba = model.encode(ba, conf);
  EXPECT_TRUE(rows_differ(zab.memory, 0, zba.memory, 1));
  EXPECT_TRUE(rows_differ(zab.memory, 1, zba.memory, 0));
}

TEST(Transformer, ConfidenceChannelIsLive) {
  TransformerCS model(small_config());
  const std::vector<int> tokens{5, 6, 7, 8};
  std::vector<int> conf(4, 90);
  const Encoded base = model.encode(tokens, conf);
  conf[2] = 23;
  const Encoded changed = model.encode(tokens, conf);
  EXPECT_TRUE(rows_differ(base.memory, 2, changed.memory, 2));
}

TEST(Transformer, DecodeStepIsADistribution) {
  TransformerCS model(small_config());
  const std::vector<int> tokens{5, 6, 7}, conf{10, 50, 90};
  const Encoded z = model.encode(tokens, conf);
  const std::vector<int> prefix{kBosId, 9, 4};
  const auto row = model.decode_step(z, prefix);
  ASSERT_EQ(row.size(), 20u);
  double total = 0.0;
  for (double lp : row) total += std::exp(lp);
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(Transformer, DecoderIsCausal) {
  TransformerCS model(small_config());
  const std::vector<int> tokens{5, 6, 7}, conf{10, 50, 90};
  const Encoded z = model.encode(tokens, conf);
  const auto alone = model.decode_step(z, std::vector<int>{kBosId});
  for (int t : {4, 9, 15}) {
    Batch dec;
    dec.size = 1;
    dec.tgt_len = 2;
    dec.tgt_in = {kBosId, t};
    dec.tgt_out = {kPadId, kPadId};
    dec.tgt_lengths = {2};
    Rng rng(0);
    const Tensor lp = model.decode_batch(z, dec, false, rng);
    for (std::size_t v = 0; v < alone.size(); ++v) EXPECT_NEAR(lp.at(0, v), alone[v], 1e-12);
  }
}

TEST(Transformer, ZeroOutputProjectionGivesUniform) {
  TransformerCS model(small_config());
  Tensor proj = model.parameter("out.proj");
  std::fill(proj.mutable_data().begin(), proj.mutable_data().end(), 0.0);
  const std::vector<int> tokens{5, 6}, conf{10, 50};
  const auto row = model.decode_step(model.encode(tokens, conf), std::vector<int>{kBosId, 7});
  for (double lp : row) EXPECT_NEAR(std::exp(lp), 1.0 / 20.0, 1e-15);
}

TEST(Transformer, PrefixMustStartWithBos) {
  TransformerCS model(small_config());
  const std::vector<int> tokens{5}, conf{10};
  EXPECT_THROW((void)model.decode_step(model.encode(tokens, conf), std::vector<int>{7}), Error);
}

TEST(Transformer, GreedyDecodeIsCappedAndDeterministic) {
  TransformerCS model(small_config());
  const std::vector<int> tokens{5, 6, 7, 8}, conf{10, 50, 90, 100};
  const auto first = model.greedy_decode(tokens, conf, 6);
  EXPECT_LE(first.size(), 6u);
  EXPECT_EQ(model.greedy_decode(tokens, conf, 6), first);
  EXPECT_LE(model.greedy_decode(tokens, conf, 2).size(), 2u);
}

TEST(Transformer, CachedGreedyMatchesPrefixRecomputation) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    ModelConfig cfg = small_config();
    cfg.init_seed = seed;
    TransformerCS model(cfg);
    const Batch batch = micro_batch(seed, 4, cfg.vocab_size);
    EXPECT_EQ(model.greedy_decode(batch, 12), model.Seq2SeqModel::greedy_decode(batch, 12)) << seed;
  }
}

TEST(Transformer, ConfidenceRowsStartAtRepresentatives) {
  for (int mode : {101, 5, 2}) {
    ModelConfig cfg = small_config();
    cfg.conf_vocab_size = mode;
    TransformerCS model(cfg);
    const ConfQuantizer q(mode, cfg.conf_threshold);
    const Tensor table = model.parameter("enc.conf_embed");
    ASSERT_EQ(table.rows(), q.vocab_size());
    for (int b = q.min_bucket(); b <= q.max_bucket(); ++b) {
      const double expect = q.representative(b);
      for (std::size_t c = 0; c < cfg.d_conf; ++c) {
        const double got = table.at(static_cast<std::size_t>(q.row(b)), c);
        EXPECT_EQ(std::memcmp(&got, &expect, sizeof got), 0) << mode << " bucket " << b;
      }
    }
  }
}

TEST(Transformer, PlainVariantHasNoConfidenceParameters) {
  ModelConfig cfg = small_config();
  cfg.d_token = 16;
  cfg.d_conf = 0;
  TransformerCS model(cfg);
  EXPECT_EQ(model.confidence_parameter_count(), 0u);
  EXPECT_THROW((void)model.parameter("enc.conf_embed"), Error);
  const std::vector<int> tokens{5, 6}, conf{10, 50};
  EXPECT_EQ(model.encode(tokens, conf).memory.shape(), (Shape{2, 16}));
}

TEST(Transformer, AttentionTraceShapes) {
  TransformerCS model(small_config());
  const std::vector<int> tokens{5, 6, 7, 8, 9}, conf{10, 20, 30, 40, 50}, target{4, 5, 6};
  const AttentionTrace trace = model.attention_trace(tokens, conf, target);
  ASSERT_EQ(trace.encoder_self.size(), 3u);
  ASSERT_EQ(trace.decoder_self.size(), 3u);
  ASSERT_EQ(trace.decoder_source.size(), 3u);
  auto check = [](const AttentionTrace::Layers& layers, std::size_t rows, std::size_t cols) {
    for (const auto& layer : layers) {
      ASSERT_EQ(layer.size(), 4u);
      for (const auto& m : layer) {
        ASSERT_EQ(m.rows, rows);
        ASSERT_EQ(m.cols, cols);
        for (std::size_t i = 0; i < rows; ++i) {
          double total = 0.0;
          for (std::size_t j = 0; j < cols; ++j) total += m.at(i, j);
          EXPECT_NEAR(total, 1.0, 1e-6);
        }
      }
    }
  };
  check(trace.encoder_self, 5, 5);
  check(trace.decoder_self, 4, 4);
  check(trace.decoder_source, 4, 5);
  const auto& causal = trace.decoder_self[0][0];
  EXPECT_EQ(causal.at(0, 1), 0.0);
  const AttentionMatrix mean = mean_heads(trace.encoder_self, 3);
  double expect = 0.0;
  for (const auto& head : trace.encoder_self[2]) expect += head.at(1, 2) / 4.0;
  EXPECT_NEAR(mean.at(1, 2), expect, 1e-15);
  EXPECT_THROW((void)mean_heads(trace.encoder_self, 4), Error);
}

TEST(Transformer, EndToEndGradientMatchesFiniteDifferences) {
  TransformerCS model(micro_config(Architecture::Transformer));
  const auto result = testing::check_model_gradients(model, micro_batch(5, 2, model.config().vocab_size));
  EXPECT_LT(result.max_rel_error, 1e-3) << result.worst;
}

TEST(Model, SaveAndLoadRoundTrip) {
  TransformerCS model(small_config());
  const auto path = std::filesystem::temp_directory_path() / "ocrfix_model_roundtrip.ckpt";
  model.save(path);
  const auto loaded = load_model(path);
  ASSERT_EQ(loaded->parameters().size(), model.parameters().size());
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    const Tensor& a = model.parameters()[i].second;
    const Tensor& b = loaded->parameters()[i].second;
    EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  }
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".cfg");
}

TEST(Model, LoadRejectsShapeMismatch) {
  TransformerCS model(small_config());
  NamedTensors wrong = model.parameters();
  wrong[0].second = Tensor::zeros({1, 1});
  EXPECT_THROW(model.load_parameters(wrong), Error);
}

class Baseline : public ::testing::TestWithParam<Architecture> {};

TEST_P(Baseline, ParameterCountWithinTenPercentOfTransformer) {
  ModelConfig cfg = small_config();
  cfg.vocab_size = 300;
  cfg.d_token = 48;
  cfg.d_conf = 16;
  cfg.d_ff = 128;
  const std::size_t target = TransformerCS(cfg).parameter_count();
  const auto model = build_baseline(GetParam(), cfg);
  const double ratio = static_cast<double>(model->parameter_count()) / static_cast<double>(target);
  EXPECT_GT(ratio, 0.9);
  EXPECT_LT(ratio, 1.1);
  auto* rnn = dynamic_cast<RecurrentSeq2Seq*>(model.get());
  ASSERT_NE(rnn, nullptr);
  EXPECT_EQ(RecurrentSeq2Seq::count_parameters(model->config(), rnn->hidden()), model->parameter_count());
}

TEST_P(Baseline, ShapesAndDistributions) {
  const auto model = build_baseline(GetParam(), small_config());
  const std::vector<int> tokens{5, 6, 7}, conf{10, 50, 90};
  const Encoded z = model->encode(tokens, conf);
  EXPECT_EQ(z.memory.rows(), 3u);
  const auto row = model->decode_step(z, std::vector<int>{kBosId, 4});
  double total = 0.0;
  for (double lp : row) total += std::exp(lp);
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST_P(Baseline, ConfidenceRowsStartAtRepresentatives) {
  const auto model = build_baseline(GetParam(), small_config());
  const Tensor table = model->parameter("enc.conf_embed");
  const ConfQuantizer q(101);
  for (int b = 0; b <= 100; ++b) EXPECT_EQ(table.at(static_cast<std::size_t>(b), 0), q.representative(b));
}

TEST_P(Baseline, IncrementalGreedyMatchesPrefixRecomputation) {
  const auto model = build_baseline(GetParam(), small_config());
  const Batch batch = micro_batch(9, 3, model->config().vocab_size);
  EXPECT_EQ(model->greedy_decode(batch, 10), model->Seq2SeqModel::greedy_decode(batch, 10));
}

TEST_P(Baseline, GradientMatchesFiniteDifferences) {
  const auto model = build_baseline(GetParam(), micro_config(GetParam()));
  const auto result = testing::check_model_gradients(*model, micro_batch(6, 2, model->config().vocab_size, 2));
  EXPECT_LT(result.max_rel_error, 1e-3) << result.worst;
}

INSTANTIATE_TEST_SUITE_P(Kinds, Baseline, ::testing::Values(Architecture::Lstm, Architecture::Gru),
                         [](const auto& info) { return std::string(architecture_name(info.param)); });

}  // namespace
}  // namespace ocrfix
