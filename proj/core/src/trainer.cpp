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

#include "ocrfix/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "ocrfix/error.hpp"
#include "ocrfix/eval.hpp"

namespace ocrfix {
namespace {

std::size_t example_cost(const Example& ex) { return std::max(ex.src_ids.size(), ex.tgt_ids.size() + 1); }

Batch gather(std::span<const Example> examples, std::span<const std::size_t> indices, int pad_bucket) {
  std::vector<const Example*> ptrs;
  ptrs.reserve(indices.size());
  for (std::size_t i : indices) ptrs.push_back(&examples[i]);
  return make_batch(ptrs, pad_bucket);
}

std::vector<std::vector<std::size_t>> group(std::span<const Example> examples, std::span<const std::size_t> order,
                                            std::size_t tokens_per_batch) {
  std::vector<std::vector<std::size_t>> batches;
  std::vector<std::size_t> current;
  std::size_t widest = 0;
  for (std::size_t i : order) {
    const std::size_t cost = example_cost(examples[i]);
    const std::size_t w = std::max(widest, cost);
    if (!current.empty() && (current.size() + 1) * w > tokens_per_batch) {
      batches.push_back(std::move(current));
      current.clear();
      widest = 0;
    }
    current.push_back(i);
    widest = std::max(widest, cost);
  }
  if (!current.empty()) batches.push_back(std::move(current));
  return batches;
}

// Deterministic length-sorted batches for evaluation.
std::vector<std::vector<std::size_t>> ordered_batches(std::span<const Example> examples, std::size_t tokens_per_batch) {
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return example_cost(examples[a]) < example_cost(examples[b]); });
  return group(examples, order, tokens_per_batch);
}

int pad_bucket_of(const Seq2SeqModel& model) {
  return ConfQuantizer(model.config().conf_vocab_size, model.config().conf_threshold).min_bucket();
}

using Snapshot = std::vector<std::vector<double>>;

Snapshot snapshot(const Seq2SeqModel& model) {
  Snapshot s;
  for (const auto& [name, t] : model.parameters()) s.emplace_back(t.data().begin(), t.data().end());
  return s;
}

void restore(Seq2SeqModel& model, const Snapshot& s) {
  auto& params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i)
    std::copy(s[i].begin(), s[i].end(), params[i].second.mutable_data().begin());
}

std::string format_fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0))
    throw Error(Errc::BadEpsilon, "label smoothing must lie in [0, 1), got " + std::to_string(label_smoothing));
  if (tokens_per_batch == 0) throw Error(Errc::BadConfig, "tokens_per_batch must be positive");
  if (warmup_steps == 0) throw Error(Errc::BadConfig, "warmup_steps must be positive");
  if (max_steps == 0) throw Error(Errc::BadConfig, "max_steps must be positive");
  if (eval_every == 0) throw Error(Errc::BadConfig, "eval_every must be positive");
  if (!(lr_factor > 0.0)) throw Error(Errc::BadConfig, "lr_factor must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 && adam_eps > 0.0))
    throw Error(Errc::BadConfig, "invalid Adam hyperparameters");
  if (time_budget < 0.0) throw Error(Errc::BadConfig, "time_budget must not be negative");
}

std::vector<double> label_smooth(int target, std::size_t vocab_size, double eps, std::span<const int> excluded) {
  if (!(eps >= 0.0 && eps < 1.0))
    throw Error(Errc::BadEpsilon, "label smoothing must lie in [0, 1), got " + std::to_string(eps));
  if (target < 0 || static_cast<std::size_t>(target) >= vocab_size)
    throw Error(Errc::UnknownId, "target " + std::to_string(target) + " outside vocabulary of " +
                                     std::to_string(vocab_size));
  std::vector<char> receives(vocab_size, 1);
  for (int id : excluded)
    if (id >= 0 && static_cast<std::size_t>(id) < vocab_size) receives[static_cast<std::size_t>(id)] = 0;
  receives[static_cast<std::size_t>(target)] = 0;
  const auto others = static_cast<std::size_t>(std::count(receives.begin(), receives.end(), 1));
  std::vector<double> p(vocab_size, 0.0);
  if (others == 0) {
    p[static_cast<std::size_t>(target)] = 1.0;
    return p;
  }
  const double share = eps / static_cast<double>(others);
  for (std::size_t c = 0; c < vocab_size; ++c)
    if (receives[c]) p[c] = share;
  p[static_cast<std::size_t>(target)] = 1.0 - eps;
  return p;
}

double noam_rate(std::size_t step, std::size_t d_model, std::size_t warmup, double factor) {
  const double s = static_cast<double>(std::max<std::size_t>(step, 1));
  const double w = static_cast<double>(warmup);
  return factor / std::sqrt(static_cast<double>(d_model)) * std::min(1.0 / std::sqrt(s), s / (w * std::sqrt(w)));
}

Adam::Adam(NamedTensors params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& [name, t] : params_) {
    m_.emplace_back(t.numel(), 0.0);
    v_.emplace_back(t.numel(), 0.0);
  }
}

void Adam::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

void Adam::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = params_[k].second;
    if (!p.has_grad()) continue;
    const auto g = p.grad();
    auto w = p.mutable_data();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

Example make_example(const SentencePair& pair, const BpeVocab& vocab, const ConfQuantizer& quantizer,
                     ScoreReduction reduction) {
  const TokenizedSentence src = vocab.encode(std::string_view(pair.noisy));
  Example ex;
  ex.src_ids = src.ids;
  for (double s : align_scores(pair.scores, src.spans, reduction)) ex.src_conf.push_back(quantizer.quantize(s));
  ex.tgt_ids = vocab.encode(std::string_view(pair.clean)).ids;
  return ex;
}

std::vector<Example> make_examples(const Dataset& ds, const BpeVocab& vocab, const ConfQuantizer& quantizer,
                                   ScoreReduction reduction) {
  std::vector<Example> out;
  out.reserve(ds.pairs.size());
  for (const SentencePair& p : ds.pairs) out.push_back(make_example(p, vocab, quantizer, reduction));
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const Example> examples, std::size_t tokens_per_batch,
                                                   Rng& rng) {
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle(std::span(order), rng);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return example_cost(examples[a]) < example_cost(examples[b]); });
  auto batches = group(examples, order, tokens_per_batch);
  shuffle(std::span(batches), rng);
  return batches;
}

Tensor batch_loss(Seq2SeqModel& model, const Batch& batch, double eps, bool training, Rng& rng) {
  const Tensor log_probs = model.forward(batch, training, rng);
  const std::size_t rows = log_probs.rows(), vocab = log_probs.cols();
  std::vector<double> target(rows * vocab, 0.0);
  std::vector<double> mask(rows, 0.0);
  std::vector<std::vector<double>> cache(vocab);
  for (std::size_t r = 0; r < rows; ++r) {
    const int y = batch.tgt_out[r];
    if (y == kPadId) continue;
    mask[r] = 1.0;
    auto& dist = cache[static_cast<std::size_t>(y)];
    if (dist.empty()) dist = label_smooth(y, vocab, eps);
    std::copy(dist.begin(), dist.end(), target.begin() + static_cast<std::ptrdiff_t>(r * vocab));
  }
  return kl_div(log_probs, Tensor::from_data({rows, vocab}, std::move(target)), mask);
}

double evaluate_loss(Seq2SeqModel& model, std::span<const Example> examples, std::size_t tokens_per_batch,
                     double eps) {
  NoGradGuard no_grad;
  Rng rng(0);
  const int pad = pad_bucket_of(model);
  double total = 0.0;
  std::size_t positions = 0;
  for (const auto& indices : ordered_batches(examples, tokens_per_batch)) {
    const Batch batch = gather(examples, indices, pad);
    const std::size_t n = std::accumulate(batch.tgt_lengths.begin(), batch.tgt_lengths.end(), std::size_t{0});
    total += batch_loss(model, batch, eps, false, rng).item() * static_cast<double>(n);
    positions += n;
  }
  return positions ? total / static_cast<double>(positions) : 0.0;
}

std::size_t decode_limit(const ModelConfig& cfg, std::size_t src_len) {
  return std::min(cfg.max_len, 2 * src_len + 10);
}

std::vector<std::string> correct(Seq2SeqModel& model, const BpeVocab& vocab, std::span<const Example> examples,
                                 std::size_t tokens_per_batch) {
  const int pad = pad_bucket_of(model);
  std::vector<std::string> out(examples.size());
  for (const auto& indices : ordered_batches(examples, tokens_per_batch)) {
    const Batch batch = gather(examples, indices, pad);
    const auto decoded = model.greedy_decode(batch, decode_limit(model.config(), batch.src_len));
    for (std::size_t k = 0; k < indices.size(); ++k) out[indices[k]] = vocab.decode(decoded[k]);
  }
  return out;
}

double evaluate_cer(Seq2SeqModel& model, const BpeVocab& vocab, const Dataset& ds, std::span<const Example> examples,
                    std::size_t tokens_per_batch, std::size_t limit) {
  const std::size_t n = limit == 0 ? examples.size() : std::min(limit, examples.size());
  const auto hyps = correct(model, vocab, examples.first(n), tokens_per_batch);
  std::vector<std::string> refs;
  refs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) refs.push_back(ds.pairs[i].clean);
  return corpus_cer(hyps, refs);
}

TrainResult train(Seq2SeqModel& model, const Dataset& train_set, const Dataset& dev_set, const BpeVocab& vocab,
                  const TrainConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  if (train_set.pairs.empty() || dev_set.pairs.empty())
    throw Error(Errc::EmptyDataset, "training needs non-empty train and dev sets");
  if (vocab.size() != model.config().vocab_size)
    throw Error(Errc::BadConfig, "tokenizer has " + std::to_string(vocab.size()) + " entries, model expects " +
                                     std::to_string(model.config().vocab_size));
  const ConfQuantizer quantizer(model.config().conf_vocab_size, model.config().conf_threshold);
  const auto train_ex = make_examples(train_set, vocab, quantizer, cfg.reduction);
  const auto dev_ex = make_examples(dev_set, vocab, quantizer, cfg.reduction);
  for (const auto* set : {&train_ex, &dev_ex}) {
    for (const Example& ex : *set) {
      const std::size_t cost = example_cost(ex);
      if (cost > model.config().max_len)
        throw Error(Errc::TooLong, "sentence of " + std::to_string(cost) + " tokens exceeds max_len");
      if (cost > cfg.tokens_per_batch)
        throw Error(Errc::BadConfig, "tokens_per_batch is below the longest sentence (" + std::to_string(cost) + ")");
    }
  }

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  const int pad = pad_bucket_of(model);
  Rng rng(sub_seed(cfg.seed, 1));
  Adam adam(model.parameters(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);

  TrainResult result;
  Snapshot best;
  std::vector<std::vector<std::size_t>> epoch;
  std::size_t cursor = 0;
  double loss_sum = 0.0;
  std::size_t loss_count = 0;

  for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
    if (cursor == epoch.size()) {
      epoch = make_batches(train_ex, cfg.tokens_per_batch, rng);
      cursor = 0;
    }
    const Batch batch = gather(train_ex, epoch[cursor++], pad);
    adam.zero_grad();
    const Tensor loss = batch_loss(model, batch, cfg.label_smoothing, true, rng);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      if (!best.empty()) restore(model, best);
      throw Error(Errc::DivergedLoss, "non-finite training loss at step " + std::to_string(step) +
                                          (result.records.empty() ? std::string()
                                                                  : "; keeping the step " +
                                                                        std::to_string(result.best.step) +
                                                                        " parameters"));
    }
    backward(loss);
    adam.step(noam_rate(step, model.config().d_model(), cfg.warmup_steps, cfg.lr_factor));
    loss_sum += value;
    ++loss_count;

    const bool out_of_time = cfg.time_budget > 0.0 && elapsed() > cfg.time_budget;
    const bool scheduled = step % cfg.eval_every == 0 || step == cfg.max_steps;
    if (out_of_time && !scheduled && result.records.empty())
      throw Error(Errc::OutOfBudget, "time budget of " + std::to_string(cfg.time_budget) +
                                         " s ran out before the first evaluation");
    if (!scheduled && !out_of_time) continue;

    RunRecord rec;
    rec.step = step;
    rec.train_loss = loss_sum / static_cast<double>(loss_count);
    rec.dev_loss = evaluate_loss(model, dev_ex, cfg.tokens_per_batch, cfg.label_smoothing);
    rec.dev_cer = evaluate_cer(model, vocab, dev_set, dev_ex, cfg.tokens_per_batch, cfg.dev_cer_limit);
    rec.seconds = elapsed();
    loss_sum = 0.0;
    loss_count = 0;
    const bool improved = result.records.empty() || rec.dev_cer < result.best.dev_cer ||
                          (rec.dev_cer == result.best.dev_cer && rec.dev_loss < result.best.dev_loss);
    result.records.push_back(rec);
    if (improved) {
      result.best = rec;
      best = snapshot(model);
      if (!cfg.checkpoint.empty()) model.save(cfg.checkpoint);
    }
    if (progress) progress(rec);
    if (out_of_time) break;
  }
  restore(model, best);
  return result;
}

std::string run_records_csv(std::span<const RunRecord> records, bool include_seconds) {
  std::string out = include_seconds ? "step,train_loss,dev_loss,dev_cer,seconds\n" : "step,train_loss,dev_loss,dev_cer\n";
  char buf[160];
  for (const RunRecord& r : records) {
    if (include_seconds)
      std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.3f\n", r.step, r.train_loss, r.dev_loss, r.dev_cer,
                    r.seconds);
    else
      std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f\n", r.step, r.train_loss, r.dev_loss, r.dev_cer);
    out += buf;
  }
  return out;
}

BpeVocab train_vocab(const Dataset& train, std::size_t target_size) {
  std::vector<std::string> text;
  text.reserve(2 * train.pairs.size());
  for (const SentencePair& p : train.pairs) {
    text.push_back(p.noisy);
    text.push_back(p.clean);
  }
  return BpeVocab::train(text, target_size);
}

ExperimentRow run_experiment(const Experiment& experiment) {
  const BpeVocab vocab = train_vocab(experiment.train, experiment.bpe_vocab);
  ModelConfig mcfg = experiment.model;
  mcfg.vocab_size = vocab.size();
  auto model = build_model(mcfg);
  TrainResult result = train(*model, experiment.train, experiment.dev, vocab, experiment.train_config);

  ExperimentRow row;
  row.variant = experiment.variant;
  row.bpe_vocab = experiment.bpe_vocab;
  row.conf_vocab = mcfg.d_conf > 0 ? mcfg.conf_vocab_size : 0;
  row.parameters = model->parameter_count();
  const ConfQuantizer quantizer(mcfg.conf_vocab_size, mcfg.conf_threshold);
  const auto dev_ex = make_examples(experiment.dev, vocab, quantizer, experiment.train_config.reduction);
  row.loss = evaluate_loss(*model, dev_ex, experiment.train_config.tokens_per_batch,
                           experiment.train_config.label_smoothing);
  row.cer = experiment.train_config.dev_cer_limit == 0
                ? result.best.dev_cer
                : evaluate_cer(*model, vocab, experiment.dev, dev_ex, experiment.train_config.tokens_per_batch);
  row.records = std::move(result.records);
  return row;
}

SweepAxis parse_sweep_axis(std::string_view name) {
  if (name == "bpe") return SweepAxis::BpeVocab;
  if (name == "conf") return SweepAxis::ConfVocab;
  throw Error(Errc::BadConfig, "unknown sweep axis: " + std::string(name));
}

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            const std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

std::vector<ExperimentRow> sweep(SweepAxis axis, std::span<const std::size_t> values, const Experiment& base,
                                 std::size_t jobs) {
  std::vector<Experiment> runs;
  for (std::size_t v : values) {
    Experiment e = base;
    if (axis == SweepAxis::BpeVocab) {
      e.bpe_vocab = v;
      e.variant = "bpe-" + std::to_string(v);
    } else {
      e.model.conf_vocab_size = static_cast<int>(v);
      e.variant = "conf-" + std::to_string(v);
      ConfQuantizer(e.model.conf_vocab_size, e.model.conf_threshold);
    }
    runs.push_back(std::move(e));
  }
  std::vector<ExperimentRow> rows(runs.size());
  parallel_for(runs.size(), jobs, [&](std::size_t i) { rows[i] = run_experiment(runs[i]); });
  return rows;
}

std::vector<Experiment> architecture_variants(const Experiment& base) {
  std::vector<Experiment> runs(4, base);
  runs[0].variant = "Transformer";
  runs[0].model.arch = Architecture::Transformer;
  runs[0].model.d_token = base.model.d_model();
  runs[0].model.d_conf = 0;
  runs[1].variant = "Transformer + CS";
  runs[1].model.arch = Architecture::Transformer;
  runs[2].variant = "LSTM-2-LSTM";
  runs[2].model.arch = Architecture::Lstm;
  runs[2].model.rnn_hidden = 0;
  runs[3].variant = "GRU-2-GRU";
  runs[3].model.arch = Architecture::Gru;
  runs[3].model.rnn_hidden = 0;
  return runs;
}

std::vector<ExperimentRow> compare_architectures(const Experiment& base, std::size_t jobs) {
  const auto runs = architecture_variants(base);
  std::vector<ExperimentRow> rows(runs.size());
  parallel_for(runs.size(), jobs, [&](std::size_t i) { rows[i] = run_experiment(runs[i]); });
  return rows;
}

std::string experiment_csv(std::span<const ExperimentRow> rows) {
  std::string out = "variant,bpe_vocab,conf_vocab,params,loss,cer\n";
  for (const ExperimentRow& r : rows) {
    out += r.variant + ',' + std::to_string(r.bpe_vocab) + ',' + std::to_string(r.conf_vocab) + ',' +
           std::to_string(r.parameters) + ',' + format_fixed(r.loss) + ',' + format_fixed(r.cer) + '\n';
  }
  return out;
}

}  // namespace ocrfix
