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
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ocrfix/corpus.hpp"
#include "ocrfix/model.hpp"
#include "ocrfix/tokenizer.hpp"

namespace ocrfix {

struct TrainConfig {
  std::size_t tokens_per_batch = 2048;
  double label_smoothing = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;
  // lr(step) = lr_factor * d_model^-0.5 * min(step^-0.5, step * warmup^-1.5)
  double lr_factor = 1.0;
  std::size_t warmup_steps = 4000;
  std::size_t max_steps = 20000;
  std::uint64_t seed = 1;
  std::size_t eval_every = 500;
  // Dev sentences greedily decoded for CER at each evaluation; 0 means all.
  std::size_t dev_cer_limit = 0;
  // Wall-clock limit in seconds; 0 disables it.
  double time_budget = 0.0;
  ScoreReduction reduction = ScoreReduction::Min;
  // Best-dev checkpoint destination; empty keeps it in memory only.
  std::filesystem::path checkpoint;

  void validate() const;
};

struct RunRecord {
  std::size_t step = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double dev_cer = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<RunRecord> records;
  RunRecord best;  // the evaluation whose parameters the model holds
};

inline constexpr int kSmoothingExcludedIds[] = {kPadId, kBosId};
inline constexpr std::span<const int> kSmoothingExcluded{kSmoothingExcludedIds};

// Target distribution for one position: 1 - eps on `target`, eps spread
// evenly over every other class not listed in `excluded`.
std::vector<double> label_smooth(int target, std::size_t vocab_size, double eps,
                                 std::span<const int> excluded = kSmoothingExcluded);

double noam_rate(std::size_t step, std::size_t d_model, std::size_t warmup, double factor);

class Adam {
 public:
  Adam(NamedTensors params, double beta1, double beta2, double eps);
  void step(double lr);
  void zero_grad();
  std::size_t steps() const noexcept { return t_; }

 private:
  NamedTensors params_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

// Tokenizes a pair: noisy side with per-token confidence buckets, clean
// side as target ids.
Example make_example(const SentencePair& pair, const BpeVocab& vocab, const ConfQuantizer& quantizer,
                     ScoreReduction reduction);
std::vector<Example> make_examples(const Dataset& ds, const BpeVocab& vocab, const ConfQuantizer& quantizer,
                                   ScoreReduction reduction);

// Groups examples into batches of at most `tokens_per_batch` padded tokens
// (batch size times the longer of source and target length). Examples are
// shuffled, bucketed by length, and the batch order shuffled again.
std::vector<std::vector<std::size_t>> make_batches(std::span<const Example> examples, std::size_t tokens_per_batch,
                                                   Rng& rng);

// Label-smoothed KL loss of a batch, averaged over non-PAD target positions.
Tensor batch_loss(Seq2SeqModel& model, const Batch& batch, double eps, bool training, Rng& rng);

// Per-position mean dev loss over all examples (no dropout, no gradient).
double evaluate_loss(Seq2SeqModel& model, std::span<const Example> examples, std::size_t tokens_per_batch,
                     double eps);

std::size_t decode_limit(const ModelConfig& cfg, std::size_t src_len);

// Greedy corrections for each pair, decoded to text.
std::vector<std::string> correct(Seq2SeqModel& model, const BpeVocab& vocab, std::span<const Example> examples,
                                 std::size_t tokens_per_batch);

double evaluate_cer(Seq2SeqModel& model, const BpeVocab& vocab, const Dataset& ds, std::span<const Example> examples,
                    std::size_t tokens_per_batch, std::size_t limit = 0);

using ProgressFn = std::function<void(const RunRecord&)>;

// Trains with Adam under the inverse-square-root schedule, evaluating every
// eval_every steps. On return the model holds the parameters of the
// evaluation with the lowest dev CER. Throws DivergedLoss on a non-finite
// loss and OutOfBudget when the time budget ends before any evaluation.
TrainResult train(Seq2SeqModel& model, const Dataset& train_set, const Dataset& dev_set, const BpeVocab& vocab,
                  const TrainConfig& cfg, const ProgressFn& progress = {});

std::string run_records_csv(std::span<const RunRecord> records, bool include_seconds = true);

// One end-to-end run: BPE on the training text, model, training.
struct Experiment {
  std::string variant;
  Dataset train;
  Dataset dev;
  ModelConfig model;
  TrainConfig train_config;
  std::size_t bpe_vocab = 300;
};

struct ExperimentRow {
  std::string variant;
  std::size_t bpe_vocab = 0;
  int conf_vocab = 0;
  std::size_t parameters = 0;
  double loss = 0.0;
  double cer = 0.0;
  std::vector<RunRecord> records;
};

BpeVocab train_vocab(const Dataset& train, std::size_t target_size);
ExperimentRow run_experiment(const Experiment& experiment);

enum class SweepAxis { BpeVocab, ConfVocab };

SweepAxis parse_sweep_axis(std::string_view name);

// One run per axis value with the base experiment's seed.
std::vector<ExperimentRow> sweep(SweepAxis axis, std::span<const std::size_t> values, const Experiment& base,
                                 std::size_t jobs = 1);

// Transformer (no confidence channel), Transformer + CS, LSTM-2-LSTM and
// GRU-2-GRU on the same data and seed.
std::vector<Experiment> architecture_variants(const Experiment& base);
std::vector<ExperimentRow> compare_architectures(const Experiment& base, std::size_t jobs = 1);

// variant,bpe_vocab,conf_vocab,params,loss,cer
std::string experiment_csv(std::span<const ExperimentRow> rows);

// Runs fn(i) for i in [0, count) on up to `jobs` threads, rethrowing the
// first failure.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace ocrfix
