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

#include "ocrfix/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <nlohmann/json.hpp>

#include "ocrfix/error.hpp"
#include "ocrfix/random.hpp"
#include "ocrfix/unicode.hpp"

namespace ocrfix {

namespace {

using nlohmann::json;

std::string record_prefix(std::size_t index) { return "record " + std::to_string(index) + ": "; }

bool has_bom(const std::string& line) {
  return line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
         static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF;
}

std::string format_score(double s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", kScoreDecimals, s);
  return buf;
}

}  // namespace

int percent_bucket(double score) noexcept {
  // The epsilon absorbs representation error of decimal inputs such as 0.895.
  return static_cast<int>(std::floor(score * 100.0 + 0.5 + 1e-9));
}

void validate_pair(const SentencePair& pair, std::size_t index) {
  const std::u32string noisy = unicode::decode(pair.noisy);
  if (pair.scores.size() != noisy.size()) {
    throw Error(Errc::ScoreLengthMismatch,
                record_prefix(index) + std::to_string(pair.scores.size()) + " scores for " +
                    std::to_string(noisy.size()) + " characters");
  }
  for (std::size_t i = 0; i < pair.scores.size(); ++i) {
    const double s = pair.scores[i];
    if (!(s >= 0.0 && s <= 1.0)) {
      throw Error(Errc::ScoreOutOfRange,
                  record_prefix(index) + "score " + std::to_string(i) + " = " + std::to_string(s));
    }
  }
  if (unicode::trim(noisy).empty()) throw Error(Errc::EmptyText, record_prefix(index) + "noisy is empty");
  if (unicode::trim(unicode::decode(pair.clean)).empty()) {
    throw Error(Errc::EmptyText, record_prefix(index) + "clean is empty");
  }
}

SentencePair parse_record(const std::string& line, std::size_t index, bool require_clean) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(Errc::MalformedRecord, record_prefix(index) + e.what());
  }
  if (!j.is_object()) throw Error(Errc::MalformedRecord, record_prefix(index) + "not a JSON object");

  SentencePair pair;
  auto need = [&](const char* key) -> const json* {
    auto it = j.find(key);
    if (it == j.end()) return nullptr;
    return &*it;
  };
  const json* noisy = need("noisy");
  const json* scores = need("scores");
  const json* clean = need("clean");
  if (noisy == nullptr || !noisy->is_string()) {
    throw Error(Errc::MissingField, record_prefix(index) + "field 'noisy'");
  }
  if (scores == nullptr || !scores->is_array()) {
    throw Error(Errc::MissingField, record_prefix(index) + "field 'scores'");
  }
  pair.noisy = noisy->get<std::string>();
  pair.scores.reserve(scores->size());
  for (const auto& s : *scores) {
    if (!s.is_number()) throw Error(Errc::MissingField, record_prefix(index) + "non-numeric score");
    pair.scores.push_back(s.get<double>());
  }
  if (clean != nullptr && clean->is_string()) {
    pair.clean = unicode::nfc(clean->get<std::string>());
  } else if (require_clean) {
    throw Error(Errc::MissingField, record_prefix(index) + "field 'clean'");
  }
  return pair;
}

std::string format_record(const SentencePair& pair) {
  std::string out = "{\"noisy\":";
  out += json(pair.noisy).dump();
  out += ",\"scores\":[";
  for (std::size_t i = 0; i < pair.scores.size(); ++i) {
    if (i > 0) out += ',';
    out += format_score(pair.scores[i]);
  }
  out += "],\"clean\":";
  out += json(pair.clean).dump();
  out += '}';
  return out;
}

Dataset load_pairs(const std::filesystem::path& path, bool strict, LoadStats* stats) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());

  Dataset ds;
  LoadStats local;
  std::string line;
  std::size_t index = 0;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      first = false;
      if (has_bom(line)) {
        if (strict) throw Error(Errc::InvalidUtf8, "byte order mark at start of " + path.string());
        line.erase(0, 3);
      }
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++local.records;
    try {
      SentencePair pair = parse_record(line, index, /*require_clean=*/true);
      validate_pair(pair, index);
      ds.pairs.push_back(std::move(pair));
    } catch (const Error& e) {
      if (strict) throw;
      ++local.dropped;
      local.problems.emplace_back(e.what());
    }
    ++index;
  }
  if (stats != nullptr) *stats = std::move(local);
  return ds;
}

void write_pairs(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  for (const auto& pair : ds.pairs) out << format_record(pair) << '\n';
  out.flush();
  if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitFractions& f) {
  const std::array<double, 3> fr{f.train, f.dev, f.test};
  for (double x : fr) {
    if (!(x > 0.0)) throw Error(Errc::BadFractions, "fractions must be positive");
  }
  if (std::abs(fr[0] + fr[1] + fr[2] - 1.0) > 1e-9) {
    throw Error(Errc::BadFractions, "fractions must sum to 1");
  }
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = fr[i] * static_cast<double>(n);
    // Guard against 0.1 * 10 landing at 0.9999999.
    sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    rem[i] = exact - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];
  return sizes;
}

std::tuple<Dataset, Dataset, Dataset> split(const Dataset& ds, const SplitFractions& fractions,
                                            std::uint64_t seed) {
  const auto sizes = split_sizes(ds.size(), fractions);
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  shuffle(std::span<std::size_t>(order), rng);

  Dataset train{.pairs = {}, .split_tag = SplitTag::Train};
  Dataset dev{.pairs = {}, .split_tag = SplitTag::Dev};
  Dataset test{.pairs = {}, .split_tag = SplitTag::Test};
  std::size_t k = 0;
  for (; k < sizes[0]; ++k) train.pairs.push_back(ds.pairs[order[k]]);
  for (; k < sizes[0] + sizes[1]; ++k) dev.pairs.push_back(ds.pairs[order[k]]);
  for (; k < order.size(); ++k) test.pairs.push_back(ds.pairs[order[k]]);
  return {std::move(train), std::move(dev), std::move(test)};
}

CorpusStats stats(const Dataset& ds) {
  if (ds.empty()) throw Error(Errc::EmptyDataset, "stats of an empty dataset");
  CorpusStats st;
  st.pair_count = ds.size();
  for (int b = 0; b <= 100; ++b) st.score_histogram[b] = 0;
  for (const auto& pair : ds.pairs) {
    for (char32_t cp : unicode::decode(pair.noisy)) ++st.char_inventory[cp];
    for (double s : pair.scores) ++st.score_histogram[std::clamp(percent_bucket(s), 0, 100)];
    st.char_count += pair.scores.size();
  }
  return st;
}

namespace {

constexpr std::uint64_t kLexiconSeed = 0x7469626574616EULL;
constexpr std::size_t kLexiconSize = 240;
constexpr std::size_t kSuccessors = 5;

struct ToyLanguage {
  std::vector<std::u32string> words;
  std::vector<std::array<std::size_t, kSuccessors>> next;
};

std::u32string make_syllable(Rng& rng) {
  static constexpr char32_t kRoots[] = {
      U'ཀ', U'ཁ', U'ག', U'ང', U'ཅ', U'ཆ', U'ཇ', U'ཉ',
      U'ཏ', U'ཐ', U'ད', U'ན', U'པ', U'ཕ', U'བ', U'མ',
      U'ཙ', U'ཚ', U'ཛ', U'ཝ', U'ཞ', U'ཟ', U'འ', U'ཡ',
      U'ར', U'ལ', U'ཤ', U'ས', U'ཧ', U'ཨ'};
  static constexpr char32_t kSubjoined[] = {U'ྲ', U'ྱ', U'ླ'};
  static constexpr char32_t kVowels[] = {U'ི', U'ུ', U'ེ', U'ོ'};
  static constexpr char32_t kSuffixes[] = {U'ག', U'ང', U'ད', U'ན',
                                           U'བ', U'མ', U'ར', U'ལ', U'ས'};
  std::u32string syl;
  syl.push_back(kRoots[uniform_index(rng, std::size(kRoots))]);
  if (uniform01(rng) < 0.2) syl.push_back(kSubjoined[uniform_index(rng, std::size(kSubjoined))]);
  if (uniform01(rng) < 0.55) syl.push_back(kVowels[uniform_index(rng, std::size(kVowels))]);
  if (uniform01(rng) < 0.35) syl.push_back(kSuffixes[uniform_index(rng, std::size(kSuffixes))]);
  syl.push_back(U'་');  // tsheg
  return syl;
}

const ToyLanguage& toy_language() {
  static const ToyLanguage lang = [] {
    ToyLanguage l;
    Rng rng(kLexiconSeed);
    while (l.words.size() < kLexiconSize) {
      const std::size_t syllables = 1 + uniform_index(rng, 3);
      std::u32string word;
      for (std::size_t s = 0; s < syllables; ++s) word += make_syllable(rng);
      if (std::find(l.words.begin(), l.words.end(), word) == l.words.end()) l.words.push_back(word);
    }
    l.next.resize(l.words.size());
    for (auto& succ : l.next) {
      for (auto& w : succ) w = uniform_index(rng, l.words.size());
    }
    return l;
  }();
  return lang;
}

}  // namespace

std::vector<std::string> toy_sentences(std::size_t count, std::uint64_t seed) {
  const ToyLanguage& lang = toy_language();
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(sub_seed(seed, i));
    const std::size_t n_words = 5 + uniform_index(rng, 5);
    std::size_t w = uniform_index(rng, lang.words.size());
    std::u32string sentence;
    for (std::size_t k = 0; k < n_words; ++k) {
      if (k > 0 && k % 4 == 0) sentence.push_back(U' ');
      sentence += lang.words[w];
      // Mostly follow the bigram chain so context is predictive.
      w = uniform01(rng) < 0.9 ? lang.next[w][uniform_index(rng, kSuccessors)]
                               : uniform_index(rng, lang.words.size());
    }
    sentence.push_back(U'།');  // shad
    out.push_back(unicode::encode(sentence));
  }
  return out;
}

}  // namespace ocrfix
