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
#include <span>
#include <string>
#include <string_view>

#include "ocrfix/corpus.hpp"
#include "ocrfix/random.hpp"

namespace ocrfix {

// Synthetic OCR noise. Each clean character independently takes one
// categorical draw over {remove, replace, keep}; each of the n+1 gaps around
// the characters independently receives an inserted character with
// probability p_insert. Kept characters are scored from the clean-score
// sampler, inserted and replaced ones from the error-score sampler.
struct NoiseConfig {
  double p_remove = 0.05;
  double p_insert = 0.05;
  double p_replace = 0.15;
  double gamma_shape = 2.0;
  double gamma_scale = 1.0;
  // Clean scores are clamp(1 - g / gamma_divisor, 0, 1) for g ~ Gamma.
  double gamma_divisor = 10.0;
  double beta_alpha = 6.0;
  double beta_beta = 4.0;
  std::uint64_t seed = 0;
  // Empty means "derive from the corpus" in corrupt_corpus.
  std::u32string replacement_pool;

  void validate() const;
};

// What corrupt() did, for rate checks.
struct EditTally {
  std::size_t clean_chars = 0;
  std::size_t gaps = 0;
  std::size_t kept = 0;
  std::size_t removed = 0;
  std::size_t replaced = 0;
  std::size_t inserted = 0;
  // Sums of the emitted scores of kept characters and of replaced or
  // inserted ones.
  double kept_score_sum = 0.0;
  double error_score_sum = 0.0;

  EditTally& operator+=(const EditTally& o) noexcept;
};

double clean_score_from_gamma(double g, double divisor = 10.0) noexcept;

double sample_clean_score(Rng& rng, const NoiseConfig& cfg = {});
double sample_error_score(Rng& rng, const NoiseConfig& cfg = {});

SentencePair corrupt(std::string_view clean, const NoiseConfig& cfg, Rng& rng, EditTally* tally = nullptr);

// Sorted distinct non-whitespace code points of the corpus.
std::u32string character_inventory(std::span<const std::string> corpus);

// Sentence i is corrupted with an RNG seeded by sub_seed(seed, i), so the
// output does not depend on `jobs`.
Dataset corrupt_corpus(std::span<const std::string> clean_corpus, const NoiseConfig& cfg,
                       std::uint64_t seed, unsigned jobs = 1, EditTally* tally = nullptr);

}  // namespace ocrfix
