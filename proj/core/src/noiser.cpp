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

#include "ocrfix/noiser.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>
#include <vector>

#include "ocrfix/error.hpp"
#include "ocrfix/unicode.hpp"

namespace ocrfix {

namespace {

double round_score(double s) {
  constexpr double scale = 1e6;  // kScoreDecimals
  return std::round(s * scale) / scale;
}

char32_t pick_other(const std::u32string& pool, char32_t avoid, Rng& rng) {
  // Uniform over pool \ {avoid} without materializing the filtered pool.
  const bool present = std::binary_search(pool.begin(), pool.end(), avoid);
  const std::size_t n = pool.size() - (present ? 1 : 0);
  if (n == 0) throw Error(Errc::EmptyPool, "no replacement distinct from the original character");
  std::size_t k = uniform_index(rng, n);
  if (present) {
    const auto pos = static_cast<std::size_t>(std::lower_bound(pool.begin(), pool.end(), avoid) - pool.begin());
    if (k >= pos) ++k;
  }
  return pool[k];
}

}  // namespace

void NoiseConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(p_remove) || !prob(p_insert) || !prob(p_replace)) {
    throw Error(Errc::BadConfig, "noise probabilities must lie in [0,1]");
  }
  if (!(p_remove + p_replace < 1.0)) throw Error(Errc::BadConfig, "p_remove + p_replace must be < 1");
  if (!(gamma_shape > 0 && gamma_scale > 0 && gamma_divisor > 0 && beta_alpha > 0 && beta_beta > 0)) {
    throw Error(Errc::BadConfig, "gamma/beta parameters must be positive");
  }
}

EditTally& EditTally::operator+=(const EditTally& o) noexcept {
  clean_chars += o.clean_chars;
  gaps += o.gaps;
  kept += o.kept;
  removed += o.removed;
  replaced += o.replaced;
  inserted += o.inserted;
  kept_score_sum += o.kept_score_sum;
  error_score_sum += o.error_score_sum;
  return *this;
}

double clean_score_from_gamma(double g, double divisor) noexcept {
  return std::clamp(1.0 - g / divisor, 0.0, 1.0);
}

double sample_clean_score(Rng& rng, const NoiseConfig& cfg) {
  std::gamma_distribution<double> gamma(cfg.gamma_shape, cfg.gamma_scale);
  return clean_score_from_gamma(gamma(rng), cfg.gamma_divisor);
}

double sample_error_score(Rng& rng, const NoiseConfig& cfg) {
  std::gamma_distribution<double> ga(cfg.beta_alpha, 1.0);
  std::gamma_distribution<double> gb(cfg.beta_beta, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

SentencePair corrupt(std::string_view clean, const NoiseConfig& cfg, Rng& rng, EditTally* tally) {
  cfg.validate();
  const std::u32string src = unicode::decode(clean);
  if (src.empty()) throw Error(Errc::EmptyInput, "cannot corrupt empty text");
  const bool edits = cfg.p_insert > 0 || cfg.p_replace > 0;
  if (edits && cfg.replacement_pool.empty()) throw Error(Errc::EmptyPool, "replacement pool is empty");

  std::u32string pool = cfg.replacement_pool;
  if (!std::is_sorted(pool.begin(), pool.end())) std::sort(pool.begin(), pool.end());

  std::u32string noisy;
  std::vector<double> scores;
  noisy.reserve(src.size() + src.size() / 8);
  scores.reserve(noisy.capacity());
  EditTally t;
  t.clean_chars = src.size();
  t.gaps = src.size() + 1;

  auto maybe_insert = [&] {
    if (cfg.p_insert > 0 && uniform01(rng) < cfg.p_insert) {
      noisy.push_back(pool[uniform_index(rng, pool.size())]);
      scores.push_back(round_score(sample_error_score(rng, cfg)));
      t.error_score_sum += scores.back();
      ++t.inserted;
    }
  };

  for (char32_t c : src) {
    maybe_insert();
    const double u = uniform01(rng);
    if (u < cfg.p_remove) {
      ++t.removed;
    } else if (u < cfg.p_remove + cfg.p_replace) {
      noisy.push_back(pick_other(pool, c, rng));
      scores.push_back(round_score(sample_error_score(rng, cfg)));
      t.error_score_sum += scores.back();
      ++t.replaced;
    } else {
      noisy.push_back(c);
      scores.push_back(round_score(sample_clean_score(rng, cfg)));
      t.kept_score_sum += scores.back();
      ++t.kept;
    }
  }
  maybe_insert();

  if (tally != nullptr) *tally += t;
  return SentencePair{unicode::encode(noisy), std::move(scores), std::string(clean)};
}

std::u32string character_inventory(std::span<const std::string> corpus) {
  std::set<char32_t> chars;
  for (const auto& line : corpus) {
    for (char32_t cp : unicode::decode(line)) {
      if (!unicode::is_space(cp)) chars.insert(cp);
    }
  }
  return std::u32string(chars.begin(), chars.end());
}

Dataset corrupt_corpus(std::span<const std::string> clean_corpus, const NoiseConfig& cfg,
                       std::uint64_t seed, unsigned jobs, EditTally* tally) {
  if (clean_corpus.empty()) throw Error(Errc::EmptyInput, "empty clean corpus");
  NoiseConfig effective = cfg;
  if (effective.replacement_pool.empty()) effective.replacement_pool = character_inventory(clean_corpus);
  std::sort(effective.replacement_pool.begin(), effective.replacement_pool.end());
  effective.validate();

  const std::size_t n = clean_corpus.size();
  Dataset ds;
  ds.pairs.resize(n);
  jobs = std::max(1U, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  std::vector<EditTally> tallies(jobs);
  std::vector<std::exception_ptr> failures(jobs);

  auto work = [&](unsigned worker) {
    try {
      for (std::size_t i = worker; i < n; i += jobs) {
        Rng rng(sub_seed(seed, i));
        ds.pairs[i] = corrupt(clean_corpus[i], effective, rng, &tallies[worker]);
      }
    } catch (...) {
      failures[worker] = std::current_exception();
    }
  };
  if (jobs == 1) {
    work(0);
  } else {
    std::vector<std::jthread> threads;
    for (unsigned w = 0; w < jobs; ++w) threads.emplace_back(work, w);
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  if (tally != nullptr) {
    for (const auto& t : tallies) *tally += t;
  }
  return ds;
}

}  // namespace ocrfix
