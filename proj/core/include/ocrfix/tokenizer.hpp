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
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ocrfix {

inline constexpr int kPadId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kUnkId = 3;
inline constexpr std::size_t kNumSpecials = 4;

// Half-open code-point range [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const Span&, const Span&) = default;
};

struct TokenizedSentence {
  std::vector<int> ids;
  std::vector<Span> spans;
  std::vector<double> token_scores;  // empty for text without scores
};

// Byte-pair-encoding vocabulary over Unicode scalar values. Merges never
// cross whitespace; each whitespace character is a token of its own.
class BpeVocab {
 public:
  using Merge = std::pair<std::u32string, std::u32string>;

  // Greedy most-frequent-pair merges until the vocabulary holds
  // `target_size` entries (specials included) or no pair occurs twice.
  // Ties go to the lexicographically smallest (left, right) pair.
  static BpeVocab train(std::span<const std::string> corpus, std::size_t target_size);

  TokenizedSentence encode(std::string_view utf8) const;
  TokenizedSentence encode(std::u32string_view text) const;
  std::string decode(std::span<const int> ids) const;

  std::size_t size() const noexcept { return id_to_token_.size(); }
  std::size_t target_size() const noexcept { return target_size_; }
  std::size_t base_size() const noexcept { return base_size_; }
  const std::vector<Merge>& merges() const noexcept { return merges_; }

  // Surface form of a non-special token; specials return their display name.
  const std::u32string& token(int id) const;
  int id_of(std::u32string_view surface) const;  // kUnkId when absent
  bool is_special(int id) const noexcept { return id >= 0 && id < static_cast<int>(kNumSpecials); }

  std::string to_text() const;
  static BpeVocab from_text(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static BpeVocab load(const std::filesystem::path& path);

  friend bool operator==(const BpeVocab& a, const BpeVocab& b) {
    return a.target_size_ == b.target_size_ && a.id_to_token_ == b.id_to_token_ && a.merges_ == b.merges_;
  }

 private:
  struct PairHash {
    std::size_t operator()(std::pair<int, int> p) const noexcept {
      return std::hash<long long>{}((static_cast<long long>(p.first) << 32) ^ static_cast<unsigned>(p.second));
    }
  };

  int add_token(const std::u32string& surface);
  void add_merge(const std::u32string& left, const std::u32string& right);
  void encode_unit(std::u32string_view unit, std::size_t offset, TokenizedSentence& out) const;

  std::size_t target_size_ = 0;
  std::size_t base_size_ = 0;
  std::vector<std::u32string> id_to_token_;
  std::unordered_map<std::u32string, int> token_to_id_;
  std::vector<Merge> merges_;
  // (left id, right id) -> (rank, merged id)
  std::unordered_map<std::pair<int, int>, std::pair<int, int>, PairHash> merge_table_;
};

enum class ScoreReduction { Min, Mean };

// One score per span, reduced over the span's characters.
std::vector<double> align_scores(std::span<const double> char_scores, std::span<const Span> spans,
                                 ScoreReduction reduction = ScoreReduction::Min);

// Maps confidence scores onto the 101-, 5- or 2-way bucket vocabularies.
//   101: round(100 s)                     buckets 0..100
//     5: [0,.2) [.2,.4) [.4,.6) [.6,.8) [.8,1]  buckets 1..5
//     2: s <= threshold -> 0, else 1
class ConfQuantizer {
 public:
  explicit ConfQuantizer(int mode = 101, double threshold = 0.8);

  int mode() const noexcept { return mode_; }
  double threshold() const noexcept { return threshold_; }
  int quantize(double score) const;
  // Score a bucket's embedding row is initialized to.
  double representative(int bucket) const;
  int min_bucket() const noexcept { return mode_ == 5 ? 1 : 0; }
  int max_bucket() const noexcept { return mode_ == 101 ? 100 : mode_ == 5 ? 5 : 1; }
  // Embedding rows needed; row = bucket - min_bucket().
  std::size_t vocab_size() const noexcept { return static_cast<std::size_t>(mode_); }
  int row(int bucket) const { return bucket - min_bucket(); }

 private:
  int mode_;
  double threshold_;
};

}  // namespace ocrfix
