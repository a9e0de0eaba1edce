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

#include "settings.hpp"

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "ocrfix/error.hpp"
#include "ocrfix/random.hpp"

namespace ocrfix::cli {

namespace {

const char* section_name(Section s) {
  switch (s) {
    case Section::Noise: return "noise";
    case Section::Tokenizer: return "tokenizer";
    case Section::Model: return "model";
    case Section::Train: return "train";
  }
  return "";
}

std::string flag_of(const std::string& key) {
  std::string flag = "--" + key;
  for (char& c : flag) {
    if (c == '_') c = '-';
  }
  return flag;
}

template <typename T>
std::string to_text(const T& v) {
  if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else if constexpr (std::is_floating_point_v<T>) {
    return format_number(v);
  } else {
    return std::to_string(v);
  }
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

ModelConfig Settings::model_config(std::size_t vocab_size) const {
  ModelConfig cfg = model.config;
  cfg.arch = parse_architecture(model.arch);
  cfg.vocab_size = vocab_size;
  cfg.init_seed = sub_seed(seed, 2);
  return cfg;
}

TrainConfig Settings::train_config() const {
  TrainConfig cfg = train;
  cfg.seed = seed;
  cfg.reduction = reduction();
  return cfg;
}

ScoreReduction Settings::reduction() const {
  if (tokenizer.reduction == "min") return ScoreReduction::Min;
  if (tokenizer.reduction == "mean") return ScoreReduction::Mean;
  throw Error(Errc::BadConfig, "reduction must be min or mean, got " + tokenizer.reduction);
}

SettingsBinder::SettingsBinder(CLI::App& app, Settings& settings) : app_(app), settings_(settings) {}

template <typename T>
void SettingsBinder::add(const std::string& section, const std::string& key, T& value, const std::string& help) {
  CLI::Option* opt = app_.add_option(flag_of(key), value, help)->capture_default_str();
  if (!section.empty()) opt->group(section);
  entries_.push_back(Entry{section, key, opt,
                           [&value](const std::string& text) { return CLI::detail::lexical_cast(text, value); },
                           [&value] { return to_text(value); }});
}

void SettingsBinder::bind(Section section) {
  const std::string s = section_name(section);
  sections_.push_back(s);
  switch (section) {
    case Section::Noise: {
      NoiseConfig& n = settings_.noise;
      add(s, "p_remove", n.p_remove, "Per-character removal probability");
      add(s, "p_insert", n.p_insert, "Per-gap insertion probability");
      add(s, "p_replace", n.p_replace, "Per-character replacement probability");
      add(s, "gamma_shape", n.gamma_shape, "Gamma shape for scores of kept characters");
      add(s, "gamma_scale", n.gamma_scale, "Gamma scale for scores of kept characters");
      add(s, "gamma_divisor", n.gamma_divisor, "Kept-character score is clamp(1 - g / divisor, 0, 1)");
      add(s, "beta_alpha", n.beta_alpha, "Beta alpha for scores of edited characters");
      add(s, "beta_beta", n.beta_beta, "Beta beta for scores of edited characters");
      break;
    }
    case Section::Tokenizer: {
      TokenizerSettings& t = settings_.tokenizer;
      add(s, "bpe_vocab", t.bpe_vocab, "BPE vocabulary size including specials");
      add(s, "reduction", t.reduction, "Character-to-token score reduction (min|mean)");
      break;
    }
    case Section::Model: {
      ModelSettings& m = settings_.model;
      add(s, "arch", m.arch, "Architecture (transformer|lstm|gru)");
      add(s, "d_token", m.config.d_token, "Token embedding width");
      add(s, "d_conf", m.config.d_conf, "Confidence embedding width (0 disables the channel)");
      add(s, "heads", m.config.n_heads, "Attention heads");
      add(s, "enc_layers", m.config.n_enc_layers, "Encoder layers");
      add(s, "dec_layers", m.config.n_dec_layers, "Decoder layers");
      add(s, "d_ff", m.config.d_ff, "Feed-forward width");
      add(s, "max_len", m.config.max_len, "Longest token sequence");
      add(s, "conf_vocab", m.config.conf_vocab_size, "Confidence vocabulary (101|5|2)");
      add(s, "conf_threshold", m.config.conf_threshold, "Two-bucket confidence threshold");
      add(s, "dropout", m.config.dropout, "Dropout rate");
      add(s, "rnn_hidden", m.config.rnn_hidden, "Recurrent hidden size (0 matches the transformer's size)");
      break;
    }
    case Section::Train: {
      TrainConfig& t = settings_.train;
      add(s, "tokens_per_batch", t.tokens_per_batch, "Padded tokens per batch");
      add(s, "label_smoothing", t.label_smoothing, "Label smoothing epsilon");
      add(s, "adam_beta1", t.adam_beta1, "Adam beta1");
      add(s, "adam_beta2", t.adam_beta2, "Adam beta2");
      add(s, "adam_eps", t.adam_eps, "Adam epsilon");
      add(s, "lr_factor", t.lr_factor, "Learning-rate schedule factor");
      add(s, "warmup", t.warmup_steps, "Warmup steps");
      add(s, "max_steps", t.max_steps, "Training steps");
      add(s, "eval_every", t.eval_every, "Steps between dev evaluations");
      add(s, "dev_cer_limit", t.dev_cer_limit, "Dev sentences decoded per evaluation (0 = all)");
      add(s, "time_budget", t.time_budget, "Wall-clock limit in seconds (0 = none)");
      break;
    }
  }
}

void SettingsBinder::bind_seed() { seed_option_ = app_.add_option("--seed", settings_.seed, "Random seed")->capture_default_str(); }

void SettingsBinder::bind_config() {
  app_.add_option("--config", config_path_, "INI run config; command-line flags take precedence");
}

void SettingsBinder::apply_config_file() {
  if (config_path_.empty()) return;
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(config_path_, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(Errc::BadConfig, e.what());
  }

  std::set<std::pair<std::string, std::string>> known;
  {
    CLI::App scratch;
    Settings s;
    SettingsBinder all(scratch, s);
    for (Section sec : {Section::Noise, Section::Tokenizer, Section::Model, Section::Train}) all.bind(sec);
    for (const Entry& e : all.entries_) known.emplace(e.section, e.key);
  }

  bool has_seed = false;
  std::map<std::pair<std::string, std::string>, std::string> values;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      if (name != "seed") throw Error(Errc::BadConfig, config_path_ + ": unknown key '" + name + "'");
      has_seed = true;
      if (seed_option_ != nullptr && seed_option_->count() == 0 &&
          !CLI::detail::lexical_cast(node.data(), settings_.seed)) {
        throw Error(Errc::BadConfig, config_path_ + ": bad seed '" + node.data() + "'");
      }
      continue;
    }
    for (const auto& [key, leaf] : node) {
      if (!known.count({name, key})) {
        throw Error(Errc::BadConfig, config_path_ + ": unknown key '" + name + "." + key + "'");
      }
      values[{name, key}] = leaf.data();
    }
  }
  if (!has_seed) throw Error(Errc::BadConfig, config_path_ + ": 'seed' is mandatory");

  for (const Entry& e : entries_) {
    auto it = values.find({e.section, e.key});
    if (it == values.end() || e.option->count() > 0) continue;
    if (!e.set(it->second)) {
      throw Error(Errc::BadConfig, config_path_ + ": bad value for " + e.section + "." + e.key + ": '" +
                                       it->second + "'");
    }
  }
}

std::string SettingsBinder::effective_config() const {
  std::ostringstream os;
  os << "seed = " << settings_.seed << '\n';
  for (const std::string& section : sections_) {
    os << "\n[" << section << "]\n";
    for (const Entry& e : entries_) {
      if (e.section == section) os << e.key << " = " << e.get() << '\n';
    }
  }
  return os.str();
}

void SettingsBinder::write_effective_config(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << effective_config();
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
}

}  // namespace ocrfix::cli
