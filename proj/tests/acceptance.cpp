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

// Acceptance checks. Each criterion prints one PASS/FAIL line; the exit
// status is nonzero when any selected criterion fails.
//
//   ocrfix_acceptance            run every criterion
//   ocrfix_acceptance 3 7        run the listed criteria

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdarg>
#include <cstring>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ocrfix/corpus.hpp"
#include "ocrfix/error.hpp"
#include "ocrfix/eval.hpp"
#include "ocrfix/model.hpp"
#include "ocrfix/noiser.hpp"
#include "ocrfix/tokenizer.hpp"
#include "ocrfix/trainer.hpp"
#include "ocrfix/unicode.hpp"
#include "support/cli_support.hpp"
#include "support/edit_oracle.hpp"
#include "support/gradient_cases.hpp"
#include "support/micro_model.hpp"

namespace ocrfix::acceptance {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---- 1 ----------------------------------------------------------------------

Outcome gradients() {
  double worst_op = 0.0;
  std::string worst_name;
  std::size_t cases = 0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (auto& c : testing::gradient_cases(seed)) {
      const auto r = testing::check_gradients(c.loss, c.inputs);
      ++cases;
      if (r.max_rel_error > worst_op) {
        worst_op = r.max_rel_error;
        worst_name = c.name;
      }
    }
  }
  double worst_model = 0.0;
  std::size_t model_cases = 0;
  for (Architecture arch : {Architecture::Transformer, Architecture::Lstm, Architecture::Gru}) {
    for (std::uint64_t seed : {5u, 6u, 7u}) {
      for (std::size_t max_len : {2u, 4u}) {
        const auto model = build_model(testing::micro_config(arch));
        const auto r =
            testing::check_model_gradients(*model, testing::micro_batch(seed, 2, model->config().vocab_size, max_len));
        worst_model = std::max(worst_model, r.max_rel_error);
        ++model_cases;
      }
    }
  }
  return {worst_op < 1e-4 && worst_model < 1e-3,
          fmt("%zu op checks, worst %.2e (%s); %zu micro-model checks, worst %.2e", cases, worst_op,
              worst_name.c_str(), model_cases, worst_model)};
}

// ---- 2 ----------------------------------------------------------------------

// E[clamp(1 - g/10, 0, 1)], g ~ Gamma(2, 1), by composite Simpson on [0, 10].
double clean_mean_quadrature() {
  const int n = 20000;
  const double h = 10.0 / n;
  auto f = [](double g) { return (1.0 - g / 10.0) * g * std::exp(-g); };
  double s = f(0.0) + f(10.0);
  for (int i = 1; i < n; ++i) s += (i % 2 == 1 ? 4.0 : 2.0) * f(i * h);
  return s * h / 3.0;
}

Outcome noiser_statistics() {
  const auto corpus = toy_sentences(20000, 17);
  EditTally t;
  corrupt_corpus(corpus, NoiseConfig{}, 5, 1, &t);
  const double n = static_cast<double>(t.clean_chars);
  const double remove = t.removed / n, insert = t.inserted / static_cast<double>(t.gaps), replace = t.replaced / n;
  const std::size_t errors = t.replaced + t.inserted;
  const double clean_mean = t.kept_score_sum / static_cast<double>(t.kept);
  const double error_mean = t.error_score_sum / static_cast<double>(errors);
  const double oracle = clean_mean_quadrature();
  const bool ok = t.clean_chars >= 100000 && std::abs(remove - 0.05) <= 0.005 && std::abs(insert - 0.05) <= 0.005 &&
                  std::abs(replace - 0.15) <= 0.01 && std::abs(clean_mean - oracle) <= 0.005 &&
                  std::abs(error_mean - 0.6) <= 0.003;
  return {ok, fmt("%zu chars: remove %.4f insert %.4f replace %.4f; clean mean %.4f over %zu (quadrature %.4f); error "
                  "mean %.4f over %zu",
                  t.clean_chars, remove, insert, replace, clean_mean, t.kept, oracle, error_mean, errors)};
}

// ---- 3 ----------------------------------------------------------------------

Outcome initial_error_rate() {
  const auto corpus = toy_sentences(10000, 31);
  const Dataset ds = corrupt_corpus(corpus, NoiseConfig{}, 32);
  std::vector<std::string> noisy, clean;
  for (const auto& p : ds.pairs) {
    noisy.push_back(p.noisy);
    clean.push_back(p.clean);
  }
  const double rate = corpus_cer(noisy, clean);
  return {ds.size() == 10000 && rate >= 0.23 && rate <= 0.27, fmt("CER(noisy, clean) = %.4f over %zu sentences", rate,
                                                                   ds.size())};
}

// ---- 4 ----------------------------------------------------------------------

Outcome cer_oracle() {
  Rng rng(404);
  const std::u32string alphabet = U"abcd";
  std::size_t mismatches = 0;
  const std::size_t pairs = 10000;
  for (std::size_t i = 0; i < pairs; ++i) {
    const auto a = testing::random_word(rng, alphabet, 10);
    const auto b = testing::random_word(rng, alphabet, 10);
    if (levenshtein(a, b).total() != testing::exhaustive_edit_distance(a, b)) ++mismatches;
  }
  const std::size_t havard = levenshtein(std::string_view("havard"), std::string_view("harvard")).total();
  return {mismatches == 0 && havard == 1,
          fmt("%zu/%zu pairs disagree with exhaustive search; havard/harvard = %zu edit", mismatches, pairs, havard)};
}

// ---- 5 ----------------------------------------------------------------------

// Bucket rules written out independently of ConfQuantizer, on k/100.
int mode5_rule(int k) {
  if (k < 20) return 1;
  if (k < 40) return 2;
  if (k < 60) return 3;
  if (k < 80) return 4;
  return 5;
}
int mode2_rule(int k) { return k > 80 ? 1 : 0; }

Outcome quantizer() {
  const ConfQuantizer q101(101), q5(5), q2(2);
  std::size_t wrong = 0;
  for (int k = 0; k <= 100; ++k) {
    const double s = k / 100.0;
    wrong += q101.quantize(s) != k;
    wrong += q5.quantize(s) != mode5_rule(k);
    wrong += q2.quantize(s) != mode2_rule(k);
  }
  const bool examples = q5.quantize(0.23) == 2 && q2.quantize(0.80) == 0 && q2.quantize(0.81) == 1 &&
                        q101.quantize(0.89) != q101.quantize(0.90);
  return {wrong == 0 && examples, fmt("%zu grid mismatches over 3 modes; 0.23->%d (mode 5), 0.80->%d 0.81->%d (mode 2), "
                                      "0.89->%d 0.90->%d (mode 101)",
                                      wrong, q5.quantize(0.23), q2.quantize(0.80), q2.quantize(0.81),
                                      q101.quantize(0.89), q101.quantize(0.90))};
}

// ---- 6 ----------------------------------------------------------------------

Outcome confidence_init() {
  std::size_t checked = 0, wrong = 0;
  for (Architecture arch : {Architecture::Transformer, Architecture::Lstm, Architecture::Gru}) {
    for (int mode : {101, 5, 2}) {
      ModelConfig cfg;
      cfg.arch = arch;
      cfg.vocab_size = 40;
      cfg.d_token = 12;
      cfg.d_conf = 4;
      cfg.d_ff = 16;
      cfg.conf_vocab_size = mode;
      const auto model = build_model(cfg);
      const ConfQuantizer q(mode, cfg.conf_threshold);
      for (const auto& [name, table] : model->parameters()) {
        if (name.find("conf_embed") == std::string::npos) continue;
        for (int b = q.min_bucket(); b <= q.max_bucket(); ++b) {
          const double expect = q.representative(b);
          for (std::size_t c = 0; c < table.cols(); ++c) {
            const double got = table.at(static_cast<std::size_t>(q.row(b)), c);
            wrong += std::memcmp(&got, &expect, sizeof got) != 0;
            ++checked;
          }
        }
      }
    }
  }
  const double bucket23 = ConfQuantizer(101).representative(23);
  return {checked > 0 && wrong == 0 && bucket23 == 0.23,
          fmt("%zu confidence entries over 3 architectures x 3 modes, %zu differ bitwise", checked, wrong)};
}

// ---- 7 ----------------------------------------------------------------------

struct Reached {
  RunRecord record;
};

Outcome memorization() {
  const Dataset pairs = corrupt_corpus(toy_sentences(32, 11), NoiseConfig{}, 12);
  const BpeVocab vocab = train_vocab(pairs, 300);
  ModelConfig mc;
  mc.vocab_size = vocab.size();
  mc.d_token = 48;
  mc.d_conf = 16;
  mc.n_heads = 4;
  mc.d_ff = 128;
  mc.dropout = 0.0;
  mc.init_seed = 11;
  TransformerCS model(mc);
  TrainConfig tc;
  tc.label_smoothing = 0.0;
  tc.warmup_steps = 200;
  tc.lr_factor = 0.5;
  tc.max_steps = 2000;
  tc.eval_every = 50;
  tc.seed = 11;

  std::size_t step = 0;
  try {
    train(model, pairs, pairs, vocab, tc, [](const RunRecord& r) {
      if (r.dev_loss < 0.01 && r.dev_cer < 0.02) throw Reached{r};
    });
  } catch (const Reached& reached) {
    step = reached.record.step;
  }
  if (step == 0) return {false, "train loss 0.01 / CER 0.02 not reached within 2000 steps"};

  // Recheck the stopped model independently of the training loop.
  const ConfQuantizer quantizer(mc.conf_vocab_size, mc.conf_threshold);
  const auto examples = make_examples(pairs, vocab, quantizer, ScoreReduction::Min);
  const double loss = evaluate_loss(model, examples, tc.tokens_per_batch, 0.0);
  const auto outputs = correct(model, vocab, examples, tc.tokens_per_batch);
  std::vector<std::string> refs;
  for (const auto& p : pairs.pairs) refs.push_back(p.clean);
  const double rate = corpus_cer(outputs, refs);
  return {loss < 0.01 && rate < 0.02, fmt("step %zu: per-token loss %.5f, CER %.4f on the 32 training pairs", step,
                                          loss, rate)};
}

// ---- 8 ----------------------------------------------------------------------

Experiment toy_experiment(std::uint64_t seed) {
  const Dataset all = corrupt_corpus(toy_sentences(20000, 1000 + seed), NoiseConfig{}, 2000 + seed);
  auto [train_set, dev_set, test_set] = split(all, {0.9, 0.05, 0.05}, seed);
  Experiment e;
  e.variant = "toy";
  e.train = std::move(train_set);
  e.dev = std::move(dev_set);
  e.bpe_vocab = 300;
  e.model.d_token = 48;
  e.model.d_conf = 16;
  e.model.n_heads = 4;
  e.model.d_ff = 128;
  e.model.conf_vocab_size = 101;
  e.model.dropout = 0.0;
  e.model.init_seed = sub_seed(seed, 2);
  e.train_config.seed = seed;
  e.train_config.tokens_per_batch = 1024;
  e.train_config.warmup_steps = 400;
  e.train_config.lr_factor = 1.0;
  e.train_config.max_steps = 3000;
  e.train_config.eval_every = 1000;
  e.train_config.dev_cer_limit = 0;
  return e;
}

Outcome directional_replication() {
  const auto start = std::chrono::steady_clock::now();
  std::map<std::string, std::vector<double>> cers;
  std::vector<std::string> order;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (const ExperimentRow& row : compare_architectures(toy_experiment(seed), 1)) {
      if (!cers.count(row.variant)) order.push_back(row.variant);
      cers[row.variant].push_back(row.cer);
      std::printf("  seed %llu %-18s params %zu dev loss %.4f dev CER %.4f\n", static_cast<unsigned long long>(seed),
                  row.variant.c_str(), row.parameters, row.loss, row.cer);
      std::fflush(stdout);
    }
  }
  const double hours = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 3600.0;
  const double tcs = median(cers["Transformer + CS"]);
  const double plain = median(cers["Transformer"]);
  const double lstm = median(cers["LSTM-2-LSTM"]);
  const double gru = median(cers["GRU-2-GRU"]);
  const bool ordered = tcs <= plain && plain < lstm && plain < gru;
  return {ordered && hours <= 4.0,
          fmt("median dev CER: Transformer+CS %.4f, Transformer %.4f, LSTM %.4f, GRU %.4f; %.2f h", tcs, plain, lstm,
              gru, hours)};
}

// ---- 9 ----------------------------------------------------------------------

std::vector<std::vector<double>> read_heatmap(const fs::path& path, std::size_t cols) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(testing::slurp(path));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<double> values;
    std::size_t end = line.size();
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t comma = line.rfind(',', end - 1);
      values.push_back(std::stod(line.substr(comma + 1, end - comma - 1)));
      end = comma;
    }
    std::reverse(values.begin(), values.end());
    rows.push_back(std::move(values));
  }
  return rows;
}

Outcome attention_export() {
  testing::TempDir dir("acceptance_attn");
  const Dataset pairs = corrupt_corpus(toy_sentences(40, 91), NoiseConfig{}, 92);
  write_pairs(pairs, dir / "pairs.jsonl");
  const auto trained = testing::run_cli({"train", "--train", dir / "pairs.jsonl", "--dev", dir / "pairs.jsonl",
                                         "--output-dir", dir / "run", "--seed", "9", "--bpe-vocab", "200", "--d-token",
                                         "24", "--d-conf", "8", "--d-ff", "32", "--max-steps", "20", "--eval-every",
                                         "10", "--warmup", "10", "--dev-cer-limit", "4"});
  if (trained.code != 0) return {false, "train failed: " + trained.err};
  const auto r = testing::run_cli({"attn", "--model", dir / "run/model.ckpt", "--vocab", dir / "run/vocab.txt",
                                   "--input", dir / "pairs.jsonl", "--index", "2", "--output-dir", dir / "heat"});
  if (r.code != 0) return {false, "attn failed: " + r.err};

  // Oracle: recompute the trace and average the four heads of layer 3 by hand.
  auto base = load_model(dir / "run/model.ckpt");
  auto& model = dynamic_cast<TransformerCS&>(*base);
  const BpeVocab vocab = BpeVocab::load(dir / "run/vocab.txt");
  const ConfQuantizer quantizer(model.config().conf_vocab_size, model.config().conf_threshold);
  const Example ex = make_example(pairs.pairs[2], vocab, quantizer, ScoreReduction::Min);
  const auto target =
      model.greedy_decode(ex.src_ids, ex.src_conf, decode_limit(model.config(), ex.src_ids.size()));
  const AttentionTrace trace = model.attention_trace(ex.src_ids, ex.src_conf, target);

  double worst_sum = 0.0, worst_diff = 0.0;
  std::size_t rows_checked = 0, files = 0;
  const std::pair<const char*, const AttentionTrace::Layers*> kinds[] = {
      {"encoder-self", &trace.encoder_self}, {"decoder-self", &trace.decoder_self}, {"source", &trace.decoder_source}};
  for (const auto& [name, layers] : kinds) {
    const fs::path path = dir.path() / "heat" / (std::string(name) + "-layer3-mean.csv");
    if (!fs::exists(path)) return {false, std::string("missing ") + path.filename().string()};
    ++files;
    const auto& heads = (*layers)[2];
    if (heads.size() != 4) return {false, fmt("layer 3 has %zu heads", heads.size())};
    const auto csv = read_heatmap(path, heads[0].cols);
    if (csv.size() != heads[0].rows) return {false, std::string(name) + " row count differs"};
    for (std::size_t i = 0; i < csv.size(); ++i) {
      double row_sum = 0.0;
      for (std::size_t j = 0; j < csv[i].size(); ++j) {
        double mean = 0.0;
        for (const auto& h : heads) mean += h.at(i, j);
        mean /= 4.0;
        worst_diff = std::max(worst_diff, std::abs(mean - csv[i][j]));
        row_sum += csv[i][j];
      }
      worst_sum = std::max(worst_sum, std::abs(row_sum - 1.0));
      ++rows_checked;
    }
  }
  return {files == 3 && worst_sum <= 1e-6 && worst_diff <= 1e-8,
          fmt("%zu files, %zu rows; max |row sum - 1| %.2e; max deviation from hand-averaged 4 heads of layer 3 %.2e",
              files, rows_checked, worst_sum, worst_diff)};
}

// ---- 10 ---------------------------------------------------------------------

Outcome determinism() {
  testing::TempDir a("acceptance_det_a"), b("acceptance_det_b");
  const std::string fa = testing::run_pipeline(a.path(), "21");
  if (!fa.empty()) return {false, fa};
  const std::string fb = testing::run_pipeline(b.path(), "21");
  if (!fb.empty()) return {false, fb};
  const auto sa = testing::snapshot(a.path());
  const auto sb = testing::snapshot(b.path());
  std::vector<std::string> differing;
  for (const auto& [name, content] : sa) {
    const auto it = sb.find(name);
    if (it == sb.end() || it->second != content) differing.push_back(name);
  }
  if (sa.size() != sb.size()) differing.push_back("(file sets differ)");
  std::set<std::string> commands;
  for (const auto& [name, content] : sa) {
    if (name.rfind("stdout-", 0) == 0) commands.insert(name);
  }
  std::string detail = fmt("%zu subcommands, %zu output files compared", commands.size(), sa.size());
  for (const auto& d : differing) detail += "; differs: " + d;
  return {differing.empty() && commands.size() == 11, detail};
}

struct Criterion {
  int id;
  const char* title;
  double budget_seconds;  // 0: no runtime bound
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "gradient correctness", 60, gradients},
      {2, "noiser statistics", 60, noiser_statistics},
      {3, "initial error rate", 120, initial_error_rate},
      {4, "CER oracle equivalence", 120, cer_oracle},
      {5, "quantizer exactness", 1, quantizer},
      {6, "confidence embedding initialization", 1, confidence_init},
      {7, "overfit smoke test", 600, memorization},
      {8, "directional replication at toy scale", 4 * 3600, directional_replication},
      {9, "attention export recipe", 60, attention_export},
      {10, "determinism", 0, determinism},
  };
  return all;
}

}  // namespace
}  // namespace ocrfix::acceptance

int main(int argc, char** argv) {
  using namespace ocrfix::acceptance;
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  bool all_pass = true;
  for (const Criterion& c : criteria()) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0 && seconds > c.budget_seconds) {
      o.pass = false;
      o.detail += fmt("; runtime %.1f s exceeds %.0f s", seconds, c.budget_seconds);
    }
    std::printf("[%s] criterion %d: %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str(),
                seconds);
    std::fflush(stdout);
    all_pass = all_pass && o.pass;
  }
  return all_pass ? 0 : 1;
}
