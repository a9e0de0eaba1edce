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

#include "ocrfix/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ocrfix/error.hpp"
#include "ocrfix/tokenizer.hpp"

namespace ocrfix {
namespace {

std::string trim_ascii(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  if constexpr (std::is_floating_point_v<T>) {
    std::size_t used = 0;
    try {
      out = static_cast<T>(std::stod(value, &used));
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != value.size()) throw Error(Errc::BadConfig, "bad value for " + key + ": " + value);
  } else {
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size())
      throw Error(Errc::BadConfig, "bad value for " + key + ": " + value);
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string_view architecture_name(Architecture arch) noexcept {
  switch (arch) {
    case Architecture::Transformer: return "transformer";
    case Architecture::Lstm: return "lstm";
    case Architecture::Gru: return "gru";
  }
  return "transformer";
}

Architecture parse_architecture(std::string_view name) {
  if (name == "transformer") return Architecture::Transformer;
  if (name == "lstm") return Architecture::Lstm;
  if (name == "gru") return Architecture::Gru;
  throw Error(Errc::BadConfig, "unknown architecture: " + std::string(name));
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::BadConfig, what); };
  if (d_token == 0) fail("d_token must be positive");
  if (n_heads == 0 || d_model() % n_heads != 0) fail("d_model must be divisible by n_heads");
  if (n_enc_layers == 0 || n_dec_layers == 0) fail("layer counts must be positive");
  if (d_ff == 0) fail("d_ff must be positive");
  if (max_len < 2) fail("max_len must be at least 2");
  if (vocab_size < 5) fail("vocab_size must cover the special tokens and at least one symbol");
  if (conf_vocab_size != 101 && conf_vocab_size != 5 && conf_vocab_size != 2)
    fail("conf_vocab_size must be 101, 5 or 2");
  if (!(conf_threshold > 0.0 && conf_threshold < 1.0)) fail("conf_threshold must lie in (0, 1)");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
}

std::string ModelConfig::to_text() const {
  std::ostringstream out;
  out << "arch = " << architecture_name(arch) << '\n'
      << "d_token = " << d_token << '\n'
      << "d_conf = " << d_conf << '\n'
      << "n_heads = " << n_heads << '\n'
      << "n_enc_layers = " << n_enc_layers << '\n'
      << "n_dec_layers = " << n_dec_layers << '\n'
      << "d_ff = " << d_ff << '\n'
      << "max_len = " << max_len << '\n'
      << "vocab_size = " << vocab_size << '\n'
      << "conf_vocab_size = " << conf_vocab_size << '\n'
      << "conf_threshold = " << format_double(conf_threshold) << '\n'
      << "dropout = " << format_double(dropout) << '\n'
      << "rnn_hidden = " << rnn_hidden << '\n'
      << "init_seed = " << init_seed << '\n';
  return out.str();
}

ModelConfig ModelConfig::from_text(std::string_view text) {
  ModelConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const std::string stripped = trim_ascii(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) throw Error(Errc::BadConfig, "expected key = value: " + stripped);
    const std::string key = trim_ascii(std::string_view(stripped).substr(0, eq));
    const std::string value = trim_ascii(std::string_view(stripped).substr(eq + 1));
    if (key == "arch") cfg.arch = parse_architecture(value);
    else if (key == "d_token") cfg.d_token = parse_number<std::size_t>(key, value);
    else if (key == "d_conf") cfg.d_conf = parse_number<std::size_t>(key, value);
    else if (key == "n_heads") cfg.n_heads = parse_number<std::size_t>(key, value);
    else if (key == "n_enc_layers") cfg.n_enc_layers = parse_number<std::size_t>(key, value);
    else if (key == "n_dec_layers") cfg.n_dec_layers = parse_number<std::size_t>(key, value);
    else if (key == "d_ff") cfg.d_ff = parse_number<std::size_t>(key, value);
    else if (key == "max_len") cfg.max_len = parse_number<std::size_t>(key, value);
    else if (key == "vocab_size") cfg.vocab_size = parse_number<std::size_t>(key, value);
    else if (key == "conf_vocab_size") cfg.conf_vocab_size = parse_number<int>(key, value);
    else if (key == "conf_threshold") cfg.conf_threshold = parse_number<double>(key, value);
    else if (key == "dropout") cfg.dropout = parse_number<double>(key, value);
    else if (key == "rnn_hidden") cfg.rnn_hidden = parse_number<std::size_t>(key, value);
    else if (key == "init_seed") cfg.init_seed = parse_number<std::uint64_t>(key, value);
    else throw Error(Errc::BadConfig, "unknown model key: " + key);
  }
  cfg.validate();
  return cfg;
}

Batch make_batch(std::span<const Example* const> examples, int pad_bucket) {
  Batch batch;
  batch.size = examples.size();
  for (const Example* ex : examples) {
    batch.src_len = std::max(batch.src_len, ex->src_ids.size());
    batch.tgt_len = std::max(batch.tgt_len, ex->tgt_ids.size() + 1);
  }
  batch.src_ids.assign(batch.size * batch.src_len, kPadId);
  batch.src_conf.assign(batch.size * batch.src_len, pad_bucket);
  batch.tgt_in.assign(batch.size * batch.tgt_len, kPadId);
  batch.tgt_out.assign(batch.size * batch.tgt_len, kPadId);
  for (std::size_t b = 0; b < batch.size; ++b) {
    const Example& ex = *examples[b];
    if (ex.src_conf.size() != ex.src_ids.size())
      throw Error(Errc::LengthMismatch, "confidence buckets do not match source tokens");
    std::copy(ex.src_ids.begin(), ex.src_ids.end(), batch.src_ids.begin() + b * batch.src_len);
    std::copy(ex.src_conf.begin(), ex.src_conf.end(), batch.src_conf.begin() + b * batch.src_len);
    batch.src_lengths.push_back(ex.src_ids.size());
    const std::size_t row = b * batch.tgt_len;
    batch.tgt_in[row] = kBosId;
    std::copy(ex.tgt_ids.begin(), ex.tgt_ids.end(), batch.tgt_in.begin() + row + 1);
    std::copy(ex.tgt_ids.begin(), ex.tgt_ids.end(), batch.tgt_out.begin() + row);
    batch.tgt_out[row + ex.tgt_ids.size()] = kEosId;
    batch.tgt_lengths.push_back(ex.tgt_ids.size() + 1);
  }
  return batch;
}

AttentionMatrix mean_heads(const AttentionTrace::Layers& layers, std::size_t layer) {
  if (layer == 0 || layer > layers.size())
    throw Error(Errc::IndexOutOfRange, "no attention layer " + std::to_string(layer));
  const auto& heads = layers[layer - 1];
  AttentionMatrix out;
  if (heads.empty()) return out;
  out.rows = heads.front().rows;
  out.cols = heads.front().cols;
  out.values.assign(out.rows * out.cols, 0.0);
  for (const AttentionMatrix& h : heads)
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += h.values[i];
  const double n = static_cast<double>(heads.size());
  for (double& v : out.values) v /= n;
  return out;
}

Seq2SeqModel::Seq2SeqModel(ModelConfig cfg) : cfg_(std::move(cfg)), init_rng_(sub_seed(cfg_.init_seed, 0)) {
  cfg_.validate();
}

Tensor Seq2SeqModel::add_parameter(std::string name, Shape shape, Init init, double scale) {
  const std::size_t n = shape_numel(shape);
  std::vector<double> data(n, 0.0);
  switch (init) {
    case Init::Xavier: {
      const double fan_in = static_cast<double>(shape.front());
      const double fan_out = static_cast<double>(shape.back());
      const double limit = scale * std::sqrt(6.0 / (fan_in + fan_out));
      for (double& v : data) v = (2.0 * uniform01(init_rng_) - 1.0) * limit;
      break;
    }
    case Init::Normal:
      for (std::size_t i = 0; i < n; i += 2) {
        const double u1 = 1.0 - uniform01(init_rng_);
        const double u2 = uniform01(init_rng_);
        const double r = std::sqrt(-2.0 * std::log(u1));
        data[i] = scale * r * std::cos(2.0 * std::numbers::pi * u2);
        if (i + 1 < n) data[i + 1] = scale * r * std::sin(2.0 * std::numbers::pi * u2);
      }
      break;
    case Init::Zeros: break;
    case Init::Ones: std::fill(data.begin(), data.end(), scale); break;
  }
  Tensor t = Tensor::from_data(std::move(shape), std::move(data), true);
  params_.emplace_back(std::move(name), t);
  return t;
}

std::vector<int> Seq2SeqModel::conf_rows(std::span<const int> buckets) const {
  const ConfQuantizer q(cfg_.conf_vocab_size, cfg_.conf_threshold);
  std::vector<int> rows;
  rows.reserve(buckets.size());
  for (int b : buckets) {
    if (b < q.min_bucket() || b > q.max_bucket())
      throw Error(Errc::BadBucket, "confidence bucket " + std::to_string(b) + " out of range");
    rows.push_back(q.row(b));
  }
  return rows;
}

void Seq2SeqModel::check_source(std::span<const int> tokens, std::span<const int> conf_buckets) const {
  if (tokens.size() != conf_buckets.size())
    throw Error(Errc::LengthMismatch, std::to_string(tokens.size()) + " tokens but " +
                                          std::to_string(conf_buckets.size()) + " confidence buckets");
  if (tokens.size() > cfg_.max_len)
    throw Error(Errc::TooLong, std::to_string(tokens.size()) + " tokens exceed max_len " +
                                   std::to_string(cfg_.max_len));
  if (tokens.empty()) throw Error(Errc::EmptyInput, "empty source sentence");
  for (int id : tokens)
    if (id < 0 || static_cast<std::size_t>(id) >= cfg_.vocab_size)
      throw Error(Errc::UnknownId, "token id " + std::to_string(id) + " outside the vocabulary");
  (void)conf_rows(conf_buckets);
}

Tensor Seq2SeqModel::forward(const Batch& batch, bool training, Rng& rng) {
  const Encoded enc = encode_batch(batch, training, rng);
  return decode_batch(enc, batch, training, rng);
}

std::vector<std::vector<int>> Seq2SeqModel::greedy_decode(const Batch& batch, std::size_t max_out) {
  NoGradGuard no_grad;
  Rng rng(0);
  const Encoded enc = encode_batch(batch, false, rng);
  const std::size_t limit = std::min(max_out, cfg_.max_len);
  std::vector<std::vector<int>> prefixes(batch.size, std::vector<int>{kBosId});
  std::vector<std::vector<int>> out(batch.size);
  std::vector<char> done(batch.size, 0);
  std::size_t remaining = batch.size;
  for (std::size_t t = 0; t < limit && remaining > 0; ++t) {
    Batch dec;
    dec.size = batch.size;
    dec.tgt_len = t + 1;
    dec.tgt_lengths.assign(batch.size, t + 1);
    for (const auto& p : prefixes) dec.tgt_in.insert(dec.tgt_in.end(), p.begin(), p.end());
    dec.tgt_out.assign(dec.tgt_in.size(), kPadId);
    const Tensor log_probs = decode_batch(enc, dec, false, rng);
    const std::size_t vocab = log_probs.cols();
    for (std::size_t b = 0; b < batch.size; ++b) {
      int next = kEosId;
      if (!done[b]) {
        const auto row = log_probs.data().subspan((b * (t + 1) + t) * vocab, vocab);
        next = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
        if (next == kEosId) {
          done[b] = 1;
          --remaining;
        } else {
          out[b].push_back(next);
        }
      }
      prefixes[b].push_back(next);
    }
  }
  return out;
}

Encoded Seq2SeqModel::encode(std::span<const int> tokens, std::span<const int> conf_buckets) {
  check_source(tokens, conf_buckets);
  Example ex{std::vector<int>(tokens.begin(), tokens.end()), std::vector<int>(conf_buckets.begin(), conf_buckets.end()),
             {}};
  const Example* ptr = &ex;
  const Batch batch = make_batch(std::span(&ptr, 1), conf_buckets.front());
  Rng rng(0);
  return encode_batch(batch, false, rng);
}

std::vector<double> Seq2SeqModel::decode_step(const Encoded& enc, std::span<const int> prefix) {
  if (prefix.empty() || prefix.front() != kBosId) throw Error(Errc::BadConfig, "decoder prefix must start with BOS");
  if (prefix.size() > cfg_.max_len)
    throw Error(Errc::TooLong, "prefix of " + std::to_string(prefix.size()) + " exceeds max_len");
  if (enc.batch != 1) throw Error(Errc::ShapeMismatch, "decode_step expects a single encoded sentence");
  Batch dec;
  dec.size = 1;
  dec.tgt_len = prefix.size();
  dec.tgt_in.assign(prefix.begin(), prefix.end());
  dec.tgt_out.assign(prefix.size(), kPadId);
  dec.tgt_lengths = {prefix.size()};
  Rng rng(0);
  const Tensor log_probs = decode_batch(enc, dec, false, rng);
  const std::size_t vocab = log_probs.cols();
  const auto row = log_probs.data().subspan((prefix.size() - 1) * vocab, vocab);
  return {row.begin(), row.end()};
}

std::vector<int> Seq2SeqModel::greedy_decode(std::span<const int> tokens, std::span<const int> conf_buckets,
                                             std::size_t max_out) {
  check_source(tokens, conf_buckets);
  Example ex{std::vector<int>(tokens.begin(), tokens.end()), std::vector<int>(conf_buckets.begin(), conf_buckets.end()),
             {}};
  const Example* ptr = &ex;
  const Batch batch = make_batch(std::span(&ptr, 1), conf_buckets.front());
  return greedy_decode(batch, max_out).front();
}

Tensor Seq2SeqModel::parameter(std::string_view name) const {
  for (const auto& [n, t] : params_)
    if (n == name) return t;
  throw Error(Errc::BadConfig, "no parameter named " + std::string(name));
}

std::size_t Seq2SeqModel::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

std::size_t Seq2SeqModel::confidence_parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& [name, t] : params_)
    if (name.find("conf_embed") != std::string::npos) n += t.numel();
  return n;
}

void Seq2SeqModel::load_parameters(const NamedTensors& tensors) {
  for (auto& [name, param] : params_) {
    const auto it = std::find_if(tensors.begin(), tensors.end(), [&](const auto& e) { return e.first == name; });
    if (it == tensors.end()) throw Error(Errc::BadCheckpoint, "checkpoint lacks parameter " + name);
    if (it->second.shape() != param.shape())
      throw Error(Errc::BadCheckpoint, "parameter " + name + " has shape " + shape_string(it->second.shape()) +
                                           ", expected " + shape_string(param.shape()));
    std::copy(it->second.data().begin(), it->second.data().end(), param.mutable_data().begin());
  }
  if (tensors.size() != params_.size())
    throw Error(Errc::BadCheckpoint, "checkpoint holds " + std::to_string(tensors.size()) + " tensors, model has " +
                                         std::to_string(params_.size()));
}

void Seq2SeqModel::save(const std::filesystem::path& checkpoint) const {
  save_checkpoint(checkpoint, params_);
  std::filesystem::path sidecar = checkpoint;
  sidecar += ".cfg";
  std::ofstream out(sidecar, std::ios::binary);
  out << cfg_.to_text();
  if (!out) throw Error(Errc::IoFailure, "cannot write " + sidecar.string());
}

std::size_t parity_hidden_size(const ModelConfig& cfg) {
  ModelConfig tcfg = cfg;
  tcfg.arch = Architecture::Transformer;
  const double target = static_cast<double>(TransformerCS(tcfg).parameter_count());
  std::size_t best = 1;
  double best_gap = std::abs(static_cast<double>(RecurrentSeq2Seq::count_parameters(cfg, 1)) - target);
  for (std::size_t h = 2; h <= 4096; ++h) {
    const double count = static_cast<double>(RecurrentSeq2Seq::count_parameters(cfg, h));
    const double gap = std::abs(count - target);
    if (gap < best_gap) {
      best = h;
      best_gap = gap;
    }
    if (count > target) break;
  }
  return best;
}

std::unique_ptr<Seq2SeqModel> build_model(const ModelConfig& cfg) {
  if (cfg.arch == Architecture::Transformer) return std::make_unique<TransformerCS>(cfg);
  return std::make_unique<RecurrentSeq2Seq>(cfg);
}

std::unique_ptr<Seq2SeqModel> build_baseline(Architecture kind, ModelConfig cfg) {
  if (kind == Architecture::Transformer) throw Error(Errc::BadConfig, "baseline kind must be lstm or gru");
  cfg.arch = kind;
  return std::make_unique<RecurrentSeq2Seq>(cfg);
}

std::unique_ptr<Seq2SeqModel> load_model(const std::filesystem::path& checkpoint) {
  std::filesystem::path sidecar = checkpoint;
  sidecar += ".cfg";
  std::ifstream in(sidecar, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot read " + sidecar.string());
  std::stringstream text;
  text << in.rdbuf();
  auto model = build_model(ModelConfig::from_text(text.str()));
  model->load_parameters(load_checkpoint(checkpoint));
  return model;
}

}  // namespace ocrfix
