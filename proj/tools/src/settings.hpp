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
#include <map>
#include <string>
#include <vector>

#include "ocrfix/model.hpp"
#include "ocrfix/noiser.hpp"
#include "ocrfix/tokenizer.hpp"
#include "ocrfix/trainer.hpp"

namespace CLI {
class App;
class Option;
}  // namespace CLI

namespace ocrfix::cli {

struct TokenizerSettings {
  std::size_t bpe_vocab = 300;
  std::string reduction = "min";
};

struct ModelSettings {
  std::string arch = "transformer";
  ModelConfig config;
};

// Every value a run config file can carry.
struct Settings {
  std::uint64_t seed = 1;
  NoiseConfig noise;
  TokenizerSettings tokenizer;
  ModelSettings model;
  TrainConfig train;

  ModelConfig model_config(std::size_t vocab_size) const;
  TrainConfig train_config() const;
  ScoreReduction reduction() const;
};

enum class Section { Noise, Tokenizer, Model, Train };

// Flags bound to config-file keys. Values from a config file fill only the
// flags that were not given on the command line.
class SettingsBinder {
 public:
  SettingsBinder(CLI::App& app, Settings& settings);

  void bind(Section section);
  void bind_seed();
  void bind_config();

  // Applies the config file (if any) after parsing; throws Error(BadConfig).
  void apply_config_file();
  std::string effective_config() const;
  void write_effective_config(const std::filesystem::path& path) const;

 private:
  struct Entry {
    std::string section;
    std::string key;
    CLI::Option* option;
    std::function<bool(const std::string&)> set;
    std::function<std::string()> get;
  };

  template <typename T>
  void add(const std::string& section, const std::string& key, T& value, const std::string& help);

  CLI::App& app_;
  Settings& settings_;
  std::vector<Entry> entries_;
  std::vector<std::string> sections_;
  std::string config_path_;
  CLI::Option* seed_option_ = nullptr;
};

std::string format_number(double v);

}  // namespace ocrfix::cli
