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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <tuple>
#include <vector>

namespace ocrfix {

// One row of paired OCR data: noisy text, one confidence score per Unicode
// scalar value of `noisy`, and the human-corrected reference.
struct SentencePair {
  std::string noisy;
  std::vector<double> scores;
  std::string clean;

  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

enum class SplitTag { Train, Dev, Test };

struct Dataset {
  std::vector<SentencePair> pairs;
  SplitTag split_tag = SplitTag::Train;

  std::size_t size() const noexcept { return pairs.size(); }
  bool empty() const noexcept { return pairs.empty(); }
};

struct CorpusStats {
  std::size_t pair_count = 0;
  std::size_t char_count = 0;
  // Keys 0..100 are always present.
  std::map<int, std::size_t> score_histogram;
  std::map<char32_t, std::size_t> char_inventory;
};

struct LoadStats {
  std::size_t records = 0;
  std::size_t dropped = 0;
  std::vector<std::string> problems;
};

// Scores are written with this many decimals.
inline constexpr int kScoreDecimals = 6;

// round(100 * score), half-up. Shared by the histogram and the 101-way quantizer.
int percent_bucket(double score) noexcept;

// Throws Error naming `index` if the pair breaks an invariant.
void validate_pair(const SentencePair& pair, std::size_t index);

// Reads JSONL records {"noisy", "scores", "clean"}. Strict mode throws on the
// first bad record (and on a UTF-8 BOM); lenient mode drops bad records and
// counts them in `stats`. Clean text is NFC-normalized on load.
Dataset load_pairs(const std::filesystem::path& path, bool strict, LoadStats* stats = nullptr);

void write_pairs(const Dataset& ds, const std::filesystem::path& path);

// Serializes one record exactly as write_pairs does (without the newline).
std::string format_record(const SentencePair& pair);

// Parses one JSON record; `require_clean` false lets `clean` be absent.
SentencePair parse_record(const std::string& line, std::size_t index, bool require_clean = true);

struct SplitFractions {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

// Largest-remainder sizes for n items; ties go to the earlier split.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitFractions& fractions);

// Seeded shuffle followed by a contiguous cut.
std::tuple<Dataset, Dataset, Dataset> split(const Dataset& ds, const SplitFractions& fractions,
                                            std::uint64_t seed);

CorpusStats stats(const Dataset& ds);

// Clean sentences from a small seeded Tibetan-script toy language: a fixed
// lexicon of syllable words chained by a sparse word-bigram model. Stands in
// for ground-truth text when no real corpus is at hand.
std::vector<std::string> toy_sentences(std::size_t count, std::uint64_t seed);

}  // namespace ocrfix
