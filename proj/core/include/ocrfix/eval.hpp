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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ocrfix/model.hpp"
#include "ocrfix/tokenizer.hpp"

namespace ocrfix {

// Edit counts of hyp against ref: S substitutions, D reference characters
// missing from hyp, I extra characters in hyp, N reference length.
struct EditCounts {
  std::size_t S = 0;
  std::size_t D = 0;
  std::size_t I = 0;
  std::size_t N = 0;

  std::size_t total() const noexcept { return S + D + I; }
  EditCounts& operator+=(const EditCounts& o) noexcept {
    S += o.S;
    D += o.D;
    I += o.I;
    N += o.N;
    return *this;
  }
  friend bool operator==(const EditCounts&, const EditCounts&) = default;
};

enum class EditOp { Match, Substitute, Delete, Insert };

// One column of an alignment. Delete has no hyp position, Insert no ref
// position; the unused index holds the position of the next character.
struct AlignStep {
  EditOp op;
  std::size_t hyp;
  std::size_t ref;
};

// Minimum unit-cost alignment over code points. Among optimal alignments the
// backtrace prefers substitution/match, then deletion, then insertion.
std::vector<AlignStep> align(std::u32string_view hyp, std::u32string_view ref);
EditCounts levenshtein(std::u32string_view hyp, std::u32string_view ref);
EditCounts levenshtein(std::string_view hyp, std::string_view ref);

double cer(std::string_view hyp, std::string_view ref);
// Micro-averaged: total edits over total reference characters.
EditCounts corpus_edits(std::span<const std::string> hyps, std::span<const std::string> refs, std::size_t jobs = 1);
double corpus_cer(std::span<const std::string> hyps, std::span<const std::string> refs, std::size_t jobs = 1);

struct TokenErrorCounts {
  std::size_t success = 0;
  std::size_t failure = 0;
};

struct TokenErrorReport {
  std::map<std::string, TokenErrorCounts> tokens;  // keyed by noisy token surface

  TokenErrorCounts totals() const noexcept;
  // Tokens ordered by the chosen count (descending, ties by surface).
  std::vector<std::pair<std::string, TokenErrorCounts>> top(std::size_t k, bool by_failure) const;
  // token,success,failure,rate where rate = success / (success + failure).
  std::string to_csv() const;
};

// Every character-level error of `noisy` against `reference` is attributed
// to the noisy BPE token holding it and counted as a success when `output`
// gets that part of the reference right.
TokenErrorReport token_error_report(std::span<const std::string> outputs, std::span<const std::string> references,
                                    std::span<const std::string> noisy, const BpeVocab& vocab);

enum class HeatmapKind { EncoderSelf, DecoderSelf, Source };

std::string_view heatmap_kind_name(HeatmapKind kind) noexcept;
HeatmapKind parse_heatmap_kind(std::string_view name);

struct HeatmapMatrix {
  HeatmapKind kind = HeatmapKind::EncoderSelf;
  std::size_t layer = 3;
  std::optional<std::size_t> head;  // empty: mean over heads
  std::vector<std::string> x_labels;  // keys
  std::vector<std::string> y_labels;  // queries
  AttentionMatrix values;
};

// layer is 1-based; head is 0-based, std::nullopt averages all heads.
HeatmapMatrix export_heatmap(const AttentionTrace& trace, HeatmapKind kind, std::size_t layer,
                             std::optional<std::size_t> head, std::vector<std::string> x_labels,
                             std::vector<std::string> y_labels);
std::string heatmap_csv(const HeatmapMatrix& m);
void write_heatmap_csv(const HeatmapMatrix& m, const std::filesystem::path& path);
void write_heatmap_pgm(const HeatmapMatrix& m, const std::filesystem::path& path);

// Mean fraction of encoder self-attention mass with |i - j| <= window,
// averaged over rows, heads and layers.
double self_attention_locality(const AttentionTrace& trace, std::size_t window = 3);
double attention_locality(const AttentionMatrix& m, std::size_t window = 3);

}  // namespace ocrfix
