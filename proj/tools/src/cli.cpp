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

#include "ocrfix/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "ocrfix/corpus.hpp"
#include "ocrfix/error.hpp"
#include "ocrfix/eval.hpp"
#include "ocrfix/model.hpp"
#include "ocrfix/noiser.hpp"
#include "ocrfix/tokenizer.hpp"
#include "ocrfix/trainer.hpp"
#include "ocrfix/unicode.hpp"
#include "settings.hpp"

namespace ocrfix::cli {

namespace {

namespace fs = std::filesystem;

struct Io {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
};

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<std::string> read_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  return read_lines(in);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
}

void write_lines(std::ostream& out, std::span<const std::string> lines) {
  for (const auto& l : lines) out << l << '\n';
}

// Noisy text with scores; a clean side is optional.
std::vector<SentencePair> read_noisy_records(std::istream& in) {
  std::vector<SentencePair> pairs;
  std::size_t index = 0;
  for (const std::string& line : read_lines(in)) {
    if (line.empty()) continue;
    SentencePair p = parse_record(line, index, /*require_clean=*/false);
    if (p.scores.size() != unicode::length(p.noisy)) {
      throw Error(Errc::ScoreLengthMismatch, "record " + std::to_string(index) + ": score count differs from length");
    }
    for (double s : p.scores) {
      if (!(s >= 0.0 && s <= 1.0)) throw Error(Errc::ScoreOutOfRange, "record " + std::to_string(index));
    }
    pairs.push_back(std::move(p));
    ++index;
  }
  return pairs;
}

std::vector<double> parse_scores(const std::string& text) {
  std::vector<double> scores;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    if (!CLI::detail::lexical_cast(item, v)) throw Error(Errc::MalformedRecord, "bad score '" + item + "'");
    scores.push_back(v);
  }
  return scores;
}

std::vector<std::string> token_labels(const BpeVocab& vocab, std::span<const int> ids) {
  std::vector<std::string> labels;
  for (int id : ids) labels.push_back(unicode::encode(vocab.token(id)));
  return labels;
}

class Command {
 public:
  virtual ~Command() = default;
  virtual void setup(CLI::App& sub) = 0;
  virtual int execute(Io& io) = 0;
};

class SynthCommand final : public Command {
 public:
  void setup(CLI::App& sub) override {
    binder_ = std::make_unique<SettingsBinder>(sub, settings_);
    sub.add_option("--count", count_, "Number of sentences")->required();
    sub.add_option("--output", output_, "Clean text file, one sentence per line")->required();
    binder_->bind_seed();
  }
  int execute(Io& io) override {
    std::ofstream out(output_, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoFailure, "cannot write " + output_);
    const auto lines = toy_sentences(count_, settings_.seed);
    write_lines(out, lines);
    io.out << "sentences " << lines.size() << '\n';
    return kExitOk;
  }

 private:
  Settings settings_;
  std::unique_ptr<SettingsBinder> binder_;
  std::size_t count_ = 0;
  std::string output_;
};

class NoiseCommand final : public Command {
 public:
  void setup(CLI::App& sub) override {
    binder_ = std::make_unique<SettingsBinder>(sub, settings_);
    sub.add_option("--input", input_, "Clean text file, one sentence per line")->required();
    sub.add_option("--output", output_, "Output pairs (JSONL)")->required();
    binder_->bind_seed();
    sub.add_option("--jobs", jobs_, "Worker threads")->capture_default_str();
    binder_->bind_config();
    binder_->bind(Section::Noise);
  }
  int execute(Io& io) override {
    binder_->apply_config_file();
    std::vector<std::string> clean;
    for (std::string& line : read_lines(fs::path(input_))) {
      if (!unicode::trim(unicode::decode(line)).empty()) clean.push_back(unicode::nfc(line));
    }
    EditTally tally;
    const Dataset ds = corrupt_corpus(clean, settings_.noise, settings_.seed, jobs_, &tally);
    write_pairs(ds, output_);
    binder_->write_effective_config(output_ + ".config.ini");
    io.out << "pairs " << ds.size() << " removed " << tally.removed << " inserted " << tally.inserted
           << " replaced " << tally.replaced << " of " << tally.clean_chars << '\n';
    return kExitOk;
  }

 private:
  Settings settings_;
  std::unique_ptr<SettingsBinder> binder_;
  std::string input_, output_;
  unsigned jobs_ = 1;
};

class SplitCommand final : public Command {
 public:
  void setup(CLI::App& sub) override {
    binder_ = std::make_unique<SettingsBinder>(sub, settings_);
    sub.add_option("--input", input_, "Pairs (JSONL)")->required();
    sub.add_option("--train", train_, "Output train split")->required();
    sub.add_option("--dev", dev_, "Output dev split")->required();
    sub.add_option("--test", test_, "Output test split")->required();
    sub.add_option("--fractions", fractions_, "Train, dev and test fractions")->capture_default_str()->expected(3)->delimiter(',');
    binder_->bind_seed();
  }
  int execute(Io& io) override {
    const Dataset ds = load_pairs(input_, true);
    const auto [train, dev, test] = split(ds, {fractions_[0], fractions_[1], fractions_[2]}, settings_.seed);
    write_pairs(train, train_);
    write_pairs(dev, dev_);
    write_pairs(test, test_);
    io.out << "train " << train.size() << " dev " << dev.size() << " test " << test.size() << '\n';
    return kExitOk;
  }

 private:
  Settings settings_;
  std::unique_ptr<SettingsBinder> binder_;
  std::string input_, train_, dev_, test_;
  std::vector<double> fractions_{0.8, 0.1, 0.1};
};

class BpeTrainCommand final : public Command {
 public:
  void setup(CLI::App& sub) override {
    binder_ = std::make_unique<SettingsBinder>(sub, settings_);
    sub.add_option("--input", input_, "Training pairs (JSONL); noisy and clean sides are both used")->required();
    sub.add_option("--output", output_, "Vocabulary file")->required();
    binder_->bind_seed();
    binder_->bind_config();
    binder_->bind(Section::Tokenizer);
  }
  int execute(Io& io) override {
    binder_->apply_config_file();
    const Dataset ds = load_pairs(input_, true);
    const BpeVocab vocab = train_vocab(ds, settings_.tokenizer.bpe_vocab);
    vocab.save(output_);
    io.out << "vocab " << vocab.size() << " merges " << vocab.merges().size() << '\n';
    return kExitOk;
  }

 private:
  Settings settings_;
  std::unique_ptr<SettingsBinder> binder_;
  std::string input_, output_;
};

class TrainCommand final : public Command {
 public:
  void setup(CLI::App& sub) override {
    binder_ = std::make_unique<SettingsBinder>(sub, settings_);
    sub.add_option("--train", train_, "Training pairs (JSONL)")->required();
    sub.add_option("--dev", dev_, "Dev pairs (JSONL)")->required();
    sub.add_option("--output-dir", output_dir_, "Directory for vocab, checkpoint, records and config")->required();
    sub.add_option("--vocab", vocab_, "Existing vocabulary file (trained from --train when absent)");
    binder_->bind_seed();
    binder_->bind_config();
    binder_->bind(Section::Tokenizer);
    binder_->bind(Section::Model);
    binder_->bind(Section::Train);
  }
  int execute(Io& io) override {
    binder_->apply_config_file();
    const Dataset train_set = load_pairs(train_, true);
    const Dataset dev_set = load_pairs(dev_, true);
    const BpeVocab vocab = vocab_.empty() ? train_vocab(train_set, settings_.tokenizer.bpe_vocab) : BpeVocab::load(vocab_);
    auto model = build_model(settings_.model_config(vocab.size()));
    TrainConfig tc = settings_.train_config();
    const fs::path dir(output_dir_);
    fs::create_directories(dir);
    tc.checkpoint = dir / "model.ckpt";
    vocab.save(dir / "vocab.txt");
    binder_->write_effective_config(dir / "config.ini");
    io.out << "parameters " << model->parameter_count() << " vocab " << vocab.size() << '\n';
    const TrainResult result = train(*model, train_set, dev_set, vocab, tc, [&](const RunRecord& r) {
      io.out << "step " << r.step << " train_loss " << fixed6(r.train_loss) << " dev_loss " << fixed6(r.dev_loss)
             << " dev_cer " << fixed6(r.dev_cer) << '\n'
             << std::flush;
    });
    write_text(dir / "records.csv", run_records_csv(result.records, false));
    io.out << "best step " << result.best.step << " dev_loss " << fixed6(result.best.dev_loss) << " dev_cer "
           << fixed6(result.best.dev_cer) << '\n';
    return kExitOk;
  }

 private:
  Settings settings_;
  std::unique_ptr<SettingsBinder> binder_;
  std::string train_, dev_, output_dir_, vocab_;
};

class CorrectCommand final : public Command {
 public:
  void setup(CLI::App& sub) override {
    binder_ = std::make_unique<SettingsBinder>(sub, settings_);
    sub.add_option("--model", model_, "Checkpoint written by train")->required();
    sub.add_option("--vocab", vocab_, "Vocabulary file")->required();
    sub.add_option("--input", input_, "Noisy records (JSONL with noisy and scores); stdin when absent");
    sub.add_option("--output", output_, "Corrected text, one line per record; stdout when absent");
    sub.add_option("--tokens-per-batch", tokens_per_batch_, "Padded tokens per decoding batch")->capture_default_str();
    sub.add_option("--reduction", reduction_, "Character-to-token score reduction (min|mean)")->capture_default_str();
    binder_->bind_seed();
  }
  int execute(Io& io) override {
    auto model = load_model(model_);
    const BpeVocab vocab = BpeVocab::load(vocab_);
    std::vector<SentencePair> pairs;
    if (input_.empty()) {
      pairs = read_noisy_records(io.in);
    } else {
      std::ifstream in(input_, std::ios::binary);
      if (!in) throw Error(Errc::IoFailure, "cannot open " + input_);
      pairs = read_noisy_records(in);
    }
    settings_.tokenizer.reduction = reduction_;
    const ConfQuantizer quantizer(model->config().conf_vocab_size, model->config().conf_threshold);
    std::vector<Example> examples;
    for (const SentencePair& p : pairs) examples.push_back(make_example(p, vocab, quantizer, settings_.reduction()));
    const auto outputs = correct(*model, vocab, examples, tokens_per_batch_);
    if (output_.empty()) {
      write_lines(io.out, outputs);
    } else {
      std::ofstream out(output_, std::ios::binary | std::ios::trunc);
      write_lines(out, outputs);
      if (!out) throw Error(Errc::IoFailure, "cannot write " + output_);
    }
    return kExitOk;
  }

 private:
  Settings settings_;
  std::unique_ptr<SettingsBinder> binder_;
  std::string model_, vocab_, input_, output_, reduction_ = "min";
  std::size_t tokens_per_batch_ = 2048;
};

class EvalCommand final : public Command {
 public:
  void setup(CLI::App& sub) override {
    binder_ = std::make_unique<SettingsBinder>(sub, settings_);
    sub.add_option("--hyp", hyp_, "Hypothesis text, one sentence per line")->required();
    sub.add_option("--ref", ref_, "Reference text, one sentence per line")->required();
    binder_->bind_seed();
    sub.add_option("--jobs", jobs_, "Worker threads")->capture_default_str();
  }
  int execute(Io& io) override {
    const auto hyps = read_lines(fs::path(hyp_));
    const auto refs = read_lines(fs::path(ref_));
    const EditCounts c = corpus_edits(hyps, refs, jobs_);
    if (c.N == 0) throw Error(Errc::EmptyReference, "references contain no characters");
    io.out << "CER " << fixed6(static_cast<double>(c.total()) / static_cast<double>(c.N)) << '\n'
           << "S " << c.S << " D " << c.D << " I " << c.I << " N " << c.N << '\n';
    return kExitOk;
  }

 private:
  Settings settings_;
  std::unique_ptr<SettingsBinder> binder_;
  std::string hyp_, ref_;
  std::size_t jobs_ = 1;
};

class ReportCommand final : public Command {
 public:
  void setup(CLI::App& sub) override {
    binder_ = std::make_unique<SettingsBinder>(sub, settings_);
    sub.add_option("--pairs", pairs_, "Pairs (JSONL) supplying the noisy and clean sides")->required();
    sub.add_option("--hyp", hyp_, "Model output, one line per pair")->required();
    sub.add_option("--vocab", vocab_, "Vocabulary file used to segment the noisy side")->required();
    sub.add_option("--output", output_, "CSV report; stdout when absent");
    sub.add_option("--top", top_, "Keep only the k tokens with the most failures (0 keeps all)")->capture_default_str();
    binder_->bind_seed();
  }
  int execute(Io& io) override {
    const Dataset ds = load_pairs(pairs_, true);
    const auto outputs = read_lines(fs::path(hyp_));
    const BpeVocab vocab = BpeVocab::load(vocab_);
    std::vector<std::string> refs, noisy;
    for (const auto& p : ds.pairs) {
      refs.push_back(p.clean);
      noisy.push_back(p.noisy);
    }
    TokenErrorReport report = token_error_report(outputs, refs, noisy, vocab);
    if (top_ > 0) {
      TokenErrorReport kept;
      for (auto& [token, counts] : report.top(top_, true)) kept.tokens.emplace(token, counts);
      report = std::move(kept);
    }
    if (output_.empty()) {
      io.out << report.to_csv();
    } else {
      write_text(output_, report.to_csv());
    }
    return kExitOk;
  }

 private:
  Settings settings_;
  std::unique_ptr<SettingsBinder> binder_;
  std::string pairs_, hyp_, vocab_, output_;
  std::size_t top_ = 0;
};

class ExperimentCommand : public Command {
 protected:
  void setup_experiment(CLI::App& sub) {
    binder_ = std::make_unique<SettingsBinder>(sub, settings_);
    sub.add_option("--train", train_, "Training pairs (JSONL)")->required();
    sub.add_option("--dev", dev_, "Dev pairs (JSONL)")->required();
    sub.add_option("--output", output_, "Result table (CSV); stdout when absent");
    binder_->bind_seed();
    sub.add_option("--jobs", jobs_, "Runs trained in parallel")->capture_default_str();
    binder_->bind_config();
    binder_->bind(Section::Tokenizer);
    binder_->bind(Section::Model);
    binder_->bind(Section::Train);
  }
  Experiment base_experiment() {
    binder_->apply_config_file();
    Experiment e;
    e.variant = "base";
    e.train = load_pairs(train_, true);
    e.dev = load_pairs(dev_, true);
    e.model = settings_.model_config(0);
    e.train_config = settings_.train_config();
    e.bpe_vocab = settings_.tokenizer.bpe_vocab;
    return e;
  }
  void emit(Io& io, std::span<const ExperimentRow> rows) {
    const std::string csv = experiment_csv(rows);
    if (output_.empty()) {
      io.out << csv;
    } else {
      write_text(output_, csv);
      binder_->write_effective_config(output_ + ".config.ini");
    }
  }

  Settings settings_;
  std::unique_ptr<SettingsBinder> binder_;
  std::string train_, dev_, output_;
  std::size_t jobs_ = 1;
};

class SweepCommand final : public ExperimentCommand {
 public:
  void setup(CLI::App& sub) override {
    sub.add_option("--axis", axis_, "Swept quantity (bpe|conf)")->required();
    sub.add_option("--values", values_, "Comma-separated axis values")->required()->delimiter(',');
    setup_experiment(sub);
  }
  int execute(Io& io) override {
    const SweepAxis axis = parse_sweep_axis(axis_);
    const Experiment base = base_experiment();
    const auto rows = sweep(axis, values_, base, jobs_);
    emit(io, rows);
    return kExitOk;
  }

 private:
  std::string axis_;
  std::vector<std::size_t> values_;
};

class CompareCommand final : public ExperimentCommand {
 public:
  void setup(CLI::App& sub) override { setup_experiment(sub); }
  int execute(Io& io) override {
    const auto rows = compare_architectures(base_experiment(), jobs_);
    emit(io, rows);
    return kExitOk;
  }
};

class AttnCommand final : public Command {
 public:
  void setup(CLI::App& sub) override {
    binder_ = std::make_unique<SettingsBinder>(sub, settings_);
    sub.add_option("--model", model_, "Transformer checkpoint written by train")->required();
    sub.add_option("--vocab", vocab_, "Vocabulary file")->required();
    sub.add_option("--input", input_, "Pairs (JSONL); the record at --index is used");
    sub.add_option("--index", index_, "Record index within --input")->capture_default_str();
    sub.add_option("--text", text_, "Noisy sentence (instead of --input)");
    sub.add_option("--scores", scores_, "Comma-separated per-character scores for --text");
    sub.add_option("--target", target_, "Decoder-side text; the greedy correction when absent");
    sub.add_option("--kind", kind_, "encoder-self|decoder-self|source|all")->capture_default_str();
    sub.add_option("--layer", layer_, "1-based layer")->capture_default_str();
    sub.add_option("--head", head_, "0-based head; mean over heads when absent");
    sub.add_option("--output-dir", output_dir_, "Directory for heatmap CSVs")->required();
    sub.add_flag("--pgm", pgm_, "Also write grayscale PGM renders");
    sub.add_option("--reduction", reduction_, "Character-to-token score reduction (min|mean)")->capture_default_str();
    binder_->bind_seed();
  }
  int execute(Io& io) override {
    auto base = load_model(model_);
    auto* model = dynamic_cast<TransformerCS*>(base.get());
    if (model == nullptr) throw Error(Errc::BadCheckpoint, "attention export needs a transformer checkpoint");
    const BpeVocab vocab = BpeVocab::load(vocab_);

    SentencePair pair;
    if (!input_.empty()) {
      std::ifstream in(input_, std::ios::binary);
      if (!in) throw Error(Errc::IoFailure, "cannot open " + input_);
      const auto records = read_noisy_records(in);
      if (index_ >= records.size()) throw Error(Errc::IndexOutOfRange, "record " + std::to_string(index_));
      pair = records[index_];
    } else if (!text_.empty()) {
      pair.noisy = text_;
      pair.scores = scores_.empty() ? std::vector<double>(unicode::length(text_), 1.0) : parse_scores(scores_);
      if (pair.scores.size() != unicode::length(text_))
        throw Error(Errc::ScoreLengthMismatch, "--scores must give one score per character");
    } else {
      throw Error(Errc::BadConfig, "give --input or --text");
    }
    settings_.tokenizer.reduction = reduction_;
    const ConfQuantizer quantizer(model->config().conf_vocab_size, model->config().conf_threshold);
    const Example ex = make_example(pair, vocab, quantizer, settings_.reduction());
    std::vector<int> target;
    if (!target_.empty()) {
      target = vocab.encode(std::string_view(target_)).ids;
    } else {
      target = model->greedy_decode(ex.src_ids, ex.src_conf, decode_limit(model->config(), ex.src_ids.size()));
    }
    const AttentionTrace trace = model->attention_trace(ex.src_ids, ex.src_conf, target);

    std::vector<int> dec_in{kBosId};
    dec_in.insert(dec_in.end(), target.begin(), target.end());
    const auto src_labels = token_labels(vocab, ex.src_ids);
    const auto dec_labels = token_labels(vocab, dec_in);
    std::vector<HeatmapKind> kinds;
    if (kind_ == "all") {
      kinds = {HeatmapKind::EncoderSelf, HeatmapKind::DecoderSelf, HeatmapKind::Source};
    } else {
      kinds = {parse_heatmap_kind(kind_)};
    }
    const fs::path dir(output_dir_);
    fs::create_directories(dir);
    for (HeatmapKind kind : kinds) {
      const bool enc = kind == HeatmapKind::EncoderSelf;
      const bool src_keys = kind != HeatmapKind::DecoderSelf;
      const HeatmapMatrix m = export_heatmap(trace, kind, layer_, head_, src_keys ? src_labels : dec_labels,
                                             enc ? src_labels : dec_labels);
      const std::string stem = std::string(heatmap_kind_name(kind)) + "-layer" + std::to_string(layer_) + "-" +
                               (head_ ? "head" + std::to_string(*head_) : std::string("mean"));
      write_heatmap_csv(m, dir / (stem + ".csv"));
      if (pgm_) write_heatmap_pgm(m, dir / (stem + ".pgm"));
      io.out << stem << ".csv " << m.values.rows << "x" << m.values.cols << '\n';
    }
    io.out << "correction " << vocab.decode(target) << '\n';
    io.out << "encoder locality " << fixed6(self_attention_locality(trace)) << '\n';
    return kExitOk;
  }

 private:
  Settings settings_;
  std::unique_ptr<SettingsBinder> binder_;
  std::string model_, vocab_, input_, text_, scores_, target_, kind_ = "all", output_dir_, reduction_ = "min";
  std::size_t index_ = 0;
  std::size_t layer_ = 3;
  std::optional<std::size_t> head_;
  bool pgm_ = false;
};

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::BadConfig:
    case Errc::BadEpsilon:
    case Errc::BadFractions:
    case Errc::TargetTooSmall:
      return kExitUsage;
    case Errc::DivergedLoss:
    case Errc::OutOfBudget:
    case Errc::NonScalarLoss:
    case Errc::ShapeMismatch:
      return kExitRuntime;
    default:
      return kExitData;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"OCR post-correction toolkit", "ocrfix"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  struct Entry {
    const char* name;
    const char* help;
    std::unique_ptr<Command> command;
    CLI::App* sub = nullptr;
  };
  std::vector<Entry> commands;
  commands.push_back({"synth", "Generate clean toy sentences", std::make_unique<SynthCommand>()});
  commands.push_back({"noise", "Corrupt clean text into scored noisy/clean pairs", std::make_unique<NoiseCommand>()});
  commands.push_back({"split", "Split pairs into train/dev/test", std::make_unique<SplitCommand>()});
  commands.push_back({"bpe-train", "Train a BPE vocabulary", std::make_unique<BpeTrainCommand>()});
  commands.push_back({"train", "Train a correction model", std::make_unique<TrainCommand>()});
  commands.push_back({"correct", "Correct noisy records with a trained model", std::make_unique<CorrectCommand>()});
  commands.push_back({"eval", "Character error rate of hypotheses against references", std::make_unique<EvalCommand>()});
  commands.push_back({"sweep", "Train one model per BPE or confidence vocabulary size", std::make_unique<SweepCommand>()});
  commands.push_back({"compare", "Train the four architectures on the same data", std::make_unique<CompareCommand>()});
  commands.push_back({"attn", "Export attention heatmaps for one sentence", std::make_unique<AttnCommand>()});
  commands.push_back({"report", "Per-token success/failure report", std::make_unique<ReportCommand>()});
  for (Entry& e : commands) {
    e.sub = app.add_subcommand(e.name, e.help);
    e.command->setup(*e.sub);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  Io io{in, out, err};
  for (Entry& e : commands) {
    if (!e.sub->parsed()) continue;
    try {
      return e.command->execute(io);
    } catch (const Error& ex) {
      err << "ocrfix " << e.name << ": " << ex.what() << '\n';
      return exit_code_for(ex.code());
    } catch (const std::exception& ex) {
      err << "ocrfix " << e.name << ": " << ex.what() << '\n';
      return kExitRuntime;
    }
  }
  return kExitUsage;
}

}  // namespace ocrfix::cli
