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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ocrfix/error.hpp"
#include "ocrfix/eval.hpp"
#include "ocrfix/random.hpp"
#include "ocrfix/unicode.hpp"
#include "support/edit_oracle.hpp"

namespace ocrfix {
namespace {

TEST(Levenshtein, IdenticalStringsHaveNoEdits) {
  EXPECT_EQ(levenshtein(std::string_view("སྐད་"), std::string_view("སྐད་")), (EditCounts{0, 0, 0, 4}));
  EXPECT_EQ(levenshtein(std::string_view(""), std::string_view("")), (EditCounts{0, 0, 0, 0}));
}

TEST(Levenshtein, HavardNeedsOneEdit) {
  const EditCounts c = levenshtein(std::string_view("havard"), std::string_view("harvard"));
  EXPECT_EQ(c.total(), 1u);
  EXPECT_EQ(c.N, 7u);
  EXPECT_NEAR(cer("havard", "harvard"), 1.0 / 7.0, 1e-15);
}

TEST(Levenshtein, KittenSitting) {
  const EditCounts c = levenshtein(std::string_view("kitten"), std::string_view("sitting"));
  EXPECT_EQ(c.total(), 3u);
  EXPECT_EQ(testing::exhaustive_edit_distance(U"kitten", U"sitting"), 3u);
}

TEST(Levenshtein, CountsCodePointsNotBytes) {
  const EditCounts c = levenshtein(std::string_view("ཀ"), std::string_view("ཀཁ"));
  EXPECT_EQ(c, (EditCounts{0, 1, 0, 2}));
}

TEST(Levenshtein, EditTypesFollowReferenceConvention) {
  EXPECT_EQ(levenshtein(std::string_view(""), std::string_view("abc")), (EditCounts{0, 3, 0, 3}));
  EXPECT_EQ(levenshtein(std::string_view("abc"), std::string_view("")), (EditCounts{0, 0, 3, 0}));
  EXPECT_EQ(levenshtein(std::string_view("abc"), std::string_view("axc")), (EditCounts{1, 0, 0, 3}));
  // "ab" vs "ba" has optimal scripts S+S and D+I; substitution wins the tie.
  EXPECT_EQ(levenshtein(std::string_view("ab"), std::string_view("ba")), (EditCounts{2, 0, 0, 2}));
}

TEST(Levenshtein, MatchesExhaustiveSearch) {
  Rng rng(2024);
  const std::u32string alphabet = U"abcd";
  for (int trial = 0; trial < 1500; ++trial) {
    const auto a = testing::random_word(rng, alphabet, 8);
    const auto b = testing::random_word(rng, alphabet, 8);
    ASSERT_EQ(levenshtein(a, b).total(), testing::exhaustive_edit_distance(a, b)) << trial;
  }
}

TEST(Levenshtein, PropertiesOnFuzzedStrings) {
  Rng rng(7);
  const std::u32string alphabet = U"abcཀཁ ";
  for (int trial = 0; trial < 500; ++trial) {
    const auto a = testing::random_word(rng, alphabet, 12);
    const auto b = testing::random_word(rng, alphabet, 12);
    const auto c = testing::random_word(rng, alphabet, 12);
    const EditCounts ab = levenshtein(a, b), ba = levenshtein(b, a);
    EXPECT_EQ(ab.total(), ba.total());
    EXPECT_LE(ab.S + ab.D, ab.N);
    EXPECT_EQ(a.size() + ab.D, b.size() + ab.I);
    EXPECT_LE(levenshtein(a, c).total(), ab.total() + levenshtein(b, c).total());
  }
}

TEST(Cer, EmptyReferenceIsRejected) {
  try {
    (void)cer("abc", "");
    FAIL() << "expected EmptyReference";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyReference);
  }
}

TEST(Cer, CanExceedOne) { EXPECT_DOUBLE_EQ(cer("abcd", "x"), 4.0); }

TEST(Cer, CorpusIsMicroAveraged) {
  const std::vector<std::string> hyp{"a", "abcdefgh"};
  const std::vector<std::string> ref{"ab", "abcdefgh"};
  // (1 + 0) / (2 + 8), not (0.5 + 0) / 2
  EXPECT_DOUBLE_EQ(corpus_cer(hyp, ref), 0.1);
}

TEST(Cer, ParallelCorpusMatchesSerial) {
  Rng rng(3);
  std::vector<std::string> hyp, ref;
  for (int i = 0; i < 200; ++i) {
    hyp.push_back(unicode::encode(testing::random_word(rng, U"abcd", 15)));
    ref.push_back(unicode::encode(testing::random_word(rng, U"abcd", 15)) + "x");
  }
  EXPECT_EQ(corpus_edits(hyp, ref, 1), corpus_edits(hyp, ref, 4));
}

TEST(TokenErrors, PerfectOutputHasNoFailures) {
  const std::vector<std::string> ref{"the cat sat", "a dog ran"};
  const std::vector<std::string> noisy{"thx catt st", "a dg rxn"};
  const auto vocab = BpeVocab::train(ref, 20);
  const auto report = token_error_report(ref, ref, noisy, vocab);
  EXPECT_EQ(report.totals().failure, 0u);
  EXPECT_GT(report.totals().success, 0u);
}

TEST(TokenErrors, CopyingTheInputHasNoSuccesses) {
  const std::vector<std::string> ref{"the cat sat", "a dog ran"};
  const std::vector<std::string> noisy{"thx catt st", "a dg rxn"};
  const auto vocab = BpeVocab::train(ref, 20);
  const auto report = token_error_report(noisy, ref, noisy, vocab);
  EXPECT_EQ(report.totals().success, 0u);
  EXPECT_EQ(report.totals().failure, 5u);
}

TEST(TokenErrors, PlantedFixture) {
  // Three planted errors: e->x substitution, an extra 't', a dropped 'a'.
  // The output repairs the substitution and the drop only.
  const std::vector<std::string> ref{"the cat sat"};
  const std::vector<std::string> noisy{"thx catt st"};
  const std::vector<std::string> out{"the catt sat"};
  const auto vocab = BpeVocab::train(ref, 12);
  const auto report = token_error_report(out, ref, noisy, vocab);
  EXPECT_EQ(report.totals().success, 2u);
  EXPECT_EQ(report.totals().failure, 1u);
  const auto failures = report.top(5, true);
  ASSERT_EQ(failures.size(), 1u);
  EXPECT_EQ(failures.front().second.failure, 1u);
  EXPECT_NE(report.to_csv().find("token,success,failure,rate\n"), std::string::npos);
}

TEST(TokenErrors, MismatchedInputsAreRejected) {
  const std::vector<std::string> one{"a"};
  const std::vector<std::string> two{"a", "b"};
  const auto vocab = BpeVocab::train(one, 6);
  try {
    (void)token_error_report(one, two, two, vocab);
    FAIL() << "expected AlignmentFailure";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::AlignmentFailure);
  }
}

AttentionMatrix uniform_matrix(std::size_t rows, std::size_t cols) {
  return {rows, cols, std::vector<double>(rows * cols, 1.0 / static_cast<double>(cols))};
}

AttentionMatrix random_stochastic(Rng& rng, std::size_t rows, std::size_t cols) {
  AttentionMatrix m{rows, cols, std::vector<double>(rows * cols)};
  for (std::size_t i = 0; i < rows; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) total += (m.values[i * cols + j] = uniform01(rng) + 1e-3);
    for (std::size_t j = 0; j < cols; ++j) m.values[i * cols + j] /= total;
  }
  return m;
}

TEST(Heatmap, MeanOfIdenticalHeadsEqualsHead) {
  Rng rng(1);
  const AttentionMatrix head = random_stochastic(rng, 4, 4);
  AttentionTrace trace;
  trace.encoder_self.assign(3, std::vector<AttentionMatrix>(4, head));
  const HeatmapMatrix m = export_heatmap(trace, HeatmapKind::EncoderSelf, 3, std::nullopt, {}, {});
  for (std::size_t i = 0; i < head.values.size(); ++i) EXPECT_NEAR(m.values.values[i], head.values[i], 1e-15);
}

TEST(Heatmap, CsvRowsSumToOne) {
  Rng rng(2);
  AttentionTrace trace;
  trace.decoder_source.assign(3, {});
  for (auto& layer : trace.decoder_source)
    for (int h = 0; h < 4; ++h) layer.push_back(random_stochastic(rng, 3, 5));
  const HeatmapMatrix m = export_heatmap(trace, HeatmapKind::Source, 3, std::nullopt,
                                         {"a", "b,c", "\"d\"", "e", "f"}, {"x", "y", "z"});
  std::istringstream csv(heatmap_csv(m));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "query\\key,a,\"b,c\",\"\"\"d\"\"\",e,f");
  int rows = 0;
  while (std::getline(csv, line)) {
    std::istringstream fields(line);
    std::string cell;
    std::getline(fields, cell, ',');
    double total = 0.0;
    while (std::getline(fields, cell, ',')) total += std::stod(cell);
    EXPECT_NEAR(total, 1.0, 1e-6);
    ++rows;
  }
  EXPECT_EQ(rows, 3);
}

TEST(Heatmap, LayerAndHeadAreRangeChecked) {
  AttentionTrace trace;
  trace.encoder_self.assign(2, std::vector<AttentionMatrix>(4, uniform_matrix(2, 2)));
  EXPECT_THROW((void)export_heatmap(trace, HeatmapKind::EncoderSelf, 3, std::nullopt, {}, {}), Error);
  EXPECT_THROW((void)export_heatmap(trace, HeatmapKind::EncoderSelf, 1, 4, {}, {}), Error);
  const HeatmapMatrix one = export_heatmap(trace, HeatmapKind::EncoderSelf, 2, 1, {}, {});
  EXPECT_EQ(one.head, std::optional<std::size_t>(1));
}

TEST(Heatmap, PgmRendering) {
  AttentionTrace trace;
  trace.encoder_self.assign(1, {AttentionMatrix{2, 2, {1.0, 0.0, 0.5, 0.5}}});
  const auto m = export_heatmap(trace, HeatmapKind::EncoderSelf, 1, std::nullopt, {}, {});
  const auto path = std::filesystem::temp_directory_path() / "ocrfix_heatmap.pgm";
  write_heatmap_pgm(m, path);
  std::ifstream in(path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(bytes, std::string("P5\n2 2\n255\n") + "\xff" + std::string(1, '\0') + "\x80\x80");
  std::filesystem::remove(path);
}

TEST(Locality, UniformAttentionOverOneHundredKeys) {
  AttentionTrace trace;
  trace.encoder_self.assign(1, {uniform_matrix(100, 100)});
  // Interior rows see 7 of 100 keys; the 3 rows at each edge see fewer.
  EXPECT_NEAR(self_attention_locality(trace), (100.0 * 7 - 12) / 10000.0, 1e-12);
  EXPECT_NEAR(self_attention_locality(trace), 0.07, 0.002);
}

TEST(Locality, DiagonalAttentionIsFullyLocal) {
  AttentionMatrix eye{10, 10, std::vector<double>(100, 0.0)};
  for (std::size_t i = 0; i < 10; ++i) eye.values[i * 10 + i] = 1.0;
  AttentionTrace trace;
  trace.encoder_self.assign(3, std::vector<AttentionMatrix>(4, eye));
  EXPECT_DOUBLE_EQ(self_attention_locality(trace), 1.0);
}

}  // namespace
}  // namespace ocrfix
