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

#include "ocrfix/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include "ocrfix/error.hpp"
#include "ocrfix/unicode.hpp"

namespace ocrfix {

std::vector<AlignStep> align(std::u32string_view hyp, std::u32string_view ref) {
  const std::size_t n = hyp.size(), m = ref.size(), w = m + 1;
  std::vector<std::size_t> d((n + 1) * w);
  for (std::size_t j = 0; j <= m; ++j) d[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    d[i * w] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = d[(i - 1) * w + j - 1] + (hyp[i - 1] != ref[j - 1] ? 1 : 0);
      d[i * w + j] = std::min({diag, d[i * w + j - 1] + 1, d[(i - 1) * w + j] + 1});
    }
  }
  std::vector<AlignStep> steps;
  steps.reserve(std::max(n, m));
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    const std::size_t here = d[i * w + j];
    if (i > 0 && j > 0 && here == d[(i - 1) * w + j - 1] + (hyp[i - 1] != ref[j - 1] ? 1 : 0)) {
      --i;
      --j;
      steps.push_back({hyp[i] == ref[j] ? EditOp::Match : EditOp::Substitute, i, j});
    } else if (j > 0 && here == d[i * w + j - 1] + 1) {
      --j;
      steps.push_back({EditOp::Delete, i, j});
    } else {
      --i;
      steps.push_back({EditOp::Insert, i, j});
    }
  }
  std::reverse(steps.begin(), steps.end());
  return steps;
}

EditCounts levenshtein(std::u32string_view hyp, std::u32string_view ref) {
  EditCounts counts;
  counts.N = ref.size();
  for (const AlignStep& s : align(hyp, ref)) {
    switch (s.op) {
      case EditOp::Match: break;
      case EditOp::Substitute: ++counts.S; break;
      case EditOp::Delete: ++counts.D; break;
      case EditOp::Insert: ++counts.I; break;
    }
  }
  return counts;
}

EditCounts levenshtein(std::string_view hyp, std::string_view ref) {
  return levenshtein(unicode::decode(hyp), unicode::decode(ref));
}

double cer(std::string_view hyp, std::string_view ref) {
  const EditCounts c = levenshtein(hyp, ref);
  if (c.N == 0) throw Error(Errc::EmptyReference, "CER needs a non-empty reference");
  return static_cast<double>(c.total()) / static_cast<double>(c.N);
}

EditCounts corpus_edits(std::span<const std::string> hyps, std::span<const std::string> refs, std::size_t jobs) {
  if (hyps.size() != refs.size())
    throw Error(Errc::LengthMismatch, std::to_string(hyps.size()) + " hypotheses for " +
                                          std::to_string(refs.size()) + " references");
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(1, hyps.size()));
  std::vector<EditCounts> partial(jobs);
  auto work = [&](std::size_t k) {
    const std::size_t begin = hyps.size() * k / jobs, end = hyps.size() * (k + 1) / jobs;
    for (std::size_t i = begin; i < end; ++i) partial[k] += levenshtein(hyps[i], refs[i]);
  };
  if (jobs == 1) {
    work(0);
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t k = 0; k < jobs; ++k) threads.emplace_back(work, k);
  }
  EditCounts total;
  for (const EditCounts& p : partial) total += p;
  return total;
}

double corpus_cer(std::span<const std::string> hyps, std::span<const std::string> refs, std::size_t jobs) {
  const EditCounts c = corpus_edits(hyps, refs, jobs);
  if (c.N == 0) throw Error(Errc::EmptyReference, "CER needs non-empty references");
  return static_cast<double>(c.total()) / static_cast<double>(c.N);
}

TokenErrorCounts TokenErrorReport::totals() const noexcept {
  TokenErrorCounts t;
  for (const auto& [surface, c] : tokens) {
    t.success += c.success;
    t.failure += c.failure;
  }
  return t;
}

std::vector<std::pair<std::string, TokenErrorCounts>> TokenErrorReport::top(std::size_t k, bool by_failure) const {
  std::vector<std::pair<std::string, TokenErrorCounts>> rows(tokens.begin(), tokens.end());
  auto key = [by_failure](const TokenErrorCounts& c) { return by_failure ? c.failure : c.success; };
  std::stable_sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) { return key(a.second) > key(b.second); });
  std::erase_if(rows, [&](const auto& r) { return key(r.second) == 0; });
  if (rows.size() > k) rows.resize(k);
  return rows;
}

namespace {

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << bytes;
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
}

}  // namespace

std::string TokenErrorReport::to_csv() const {
  std::string out = "token,success,failure,rate\n";
  char buf[64];
  for (const auto& [surface, c] : tokens) {
    const std::size_t n = c.success + c.failure;
    std::snprintf(buf, sizeof buf, ",%zu,%zu,%.6f\n", c.success, c.failure,
                  n ? static_cast<double>(c.success) / static_cast<double>(n) : 0.0);
    out += csv_field(surface);
    out += buf;
  }
  return out;
}

TokenErrorReport token_error_report(std::span<const std::string> outputs, std::span<const std::string> references,
                                    std::span<const std::string> noisy, const BpeVocab& vocab) {
  if (outputs.size() != references.size() || noisy.size() != references.size())
    throw Error(Errc::AlignmentFailure, std::to_string(outputs.size()) + " outputs, " +
                                            std::to_string(references.size()) + " references and " +
                                            std::to_string(noisy.size()) + " noisy inputs");
  TokenErrorReport report;
  for (std::size_t k = 0; k < references.size(); ++k) {
    const std::u32string src = unicode::decode(noisy[k]);
    const std::u32string ref = unicode::decode(references[k]);
    const std::u32string out = unicode::decode(outputs[k]);

    const TokenizedSentence tok = vocab.encode(std::u32string_view(src));
    std::vector<std::size_t> token_of(src.size(), 0);
    for (std::size_t t = 0; t < tok.spans.size(); ++t)
      for (std::size_t i = tok.spans[t].begin; i < tok.spans[t].end; ++i) token_of[i] = t;
    auto surface_at = [&](std::size_t i) {
      const Span& s = tok.spans[token_of[i]];
      return unicode::encode(std::u32string_view(src).substr(s.begin, s.end - s.begin));
    };

    std::vector<char> correct(ref.size(), 0);
    std::vector<std::size_t> extra(ref.size() + 1, 0);
    for (const AlignStep& s : align(out, ref)) {
      if (s.op == EditOp::Match) correct[s.ref] = 1;
      if (s.op == EditOp::Insert) ++extra[s.ref];
    }

    for (const AlignStep& s : align(src, ref)) {
      std::string key;
      bool fixed = false;
      switch (s.op) {
        case EditOp::Match: continue;
        case EditOp::Substitute:
          key = surface_at(s.hyp);
          fixed = correct[s.ref] != 0;
          break;
        case EditOp::Insert:
          key = surface_at(s.hyp);
          fixed = extra[s.ref] == 0;
          break;
        case EditOp::Delete:
          if (s.hyp > 0) key = surface_at(s.hyp - 1);
          else if (!src.empty()) key = surface_at(0);
          else key = unicode::encode(ref[s.ref]);
          fixed = correct[s.ref] != 0;
          break;
      }
      auto& counts = report.tokens[key];
      ++(fixed ? counts.success : counts.failure);
    }
  }
  return report;
}

std::string_view heatmap_kind_name(HeatmapKind kind) noexcept {
  switch (kind) {
    case HeatmapKind::EncoderSelf: return "encoder-self";
    case HeatmapKind::DecoderSelf: return "decoder-self";
    case HeatmapKind::Source: return "source";
  }
  return "encoder-self";
}

HeatmapKind parse_heatmap_kind(std::string_view name) {
  if (name == "encoder-self") return HeatmapKind::EncoderSelf;
  if (name == "decoder-self") return HeatmapKind::DecoderSelf;
  if (name == "source") return HeatmapKind::Source;
  throw Error(Errc::BadConfig, "unknown attention kind: " + std::string(name));
}

HeatmapMatrix export_heatmap(const AttentionTrace& trace, HeatmapKind kind, std::size_t layer,
                             std::optional<std::size_t> head, std::vector<std::string> x_labels,
                             std::vector<std::string> y_labels) {
  const AttentionTrace::Layers& layers = kind == HeatmapKind::EncoderSelf   ? trace.encoder_self
                                         : kind == HeatmapKind::DecoderSelf ? trace.decoder_self
                                                                            : trace.decoder_source;
  if (layer == 0 || layer > layers.size())
    throw Error(Errc::IndexOutOfRange, "layer " + std::to_string(layer) + " not in 1.." +
                                           std::to_string(layers.size()));
  HeatmapMatrix m;
  m.kind = kind;
  m.layer = layer;
  m.head = head;
  if (head) {
    if (*head >= layers[layer - 1].size())
      throw Error(Errc::IndexOutOfRange, "head " + std::to_string(*head) + " not in 0.." +
                                             std::to_string(layers[layer - 1].size() - 1));
    m.values = layers[layer - 1][*head];
  } else {
    m.values = mean_heads(layers, layer);
  }
  if (x_labels.empty())
    for (std::size_t j = 0; j < m.values.cols; ++j) x_labels.push_back(std::to_string(j));
  if (y_labels.empty())
    for (std::size_t i = 0; i < m.values.rows; ++i) y_labels.push_back(std::to_string(i));
  if (x_labels.size() != m.values.cols || y_labels.size() != m.values.rows)
    throw Error(Errc::IndexOutOfRange, "heatmap labels do not match the matrix shape");
  m.x_labels = std::move(x_labels);
  m.y_labels = std::move(y_labels);
  return m;
}

std::string heatmap_csv(const HeatmapMatrix& m) {
  std::string out = "query\\key";
  for (const std::string& x : m.x_labels) out += ',' + csv_field(x);
  out += '\n';
  char buf[32];
  for (std::size_t i = 0; i < m.values.rows; ++i) {
    out += csv_field(m.y_labels[i]);
    for (std::size_t j = 0; j < m.values.cols; ++j) {
      std::snprintf(buf, sizeof buf, ",%.9f", m.values.at(i, j));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void write_heatmap_csv(const HeatmapMatrix& m, const std::filesystem::path& path) { write_file(path, heatmap_csv(m)); }

void write_heatmap_pgm(const HeatmapMatrix& m, const std::filesystem::path& path) {
  std::string bytes = "P5\n" + std::to_string(m.values.cols) + " " + std::to_string(m.values.rows) + "\n255\n";
  for (double v : m.values.values)
    bytes += static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * std::clamp(v, 0.0, 1.0))));
  write_file(path, bytes);
}

double attention_locality(const AttentionMatrix& m, std::size_t window) {
  if (m.rows == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < m.rows; ++i) {
    const std::size_t lo = i > window ? i - window : 0;
    const std::size_t hi = std::min(m.cols, i + window + 1);
    for (std::size_t j = lo; j < hi; ++j) total += m.at(i, j);
  }
  return total / static_cast<double>(m.rows);
}

double self_attention_locality(const AttentionTrace& trace, std::size_t window) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& layer : trace.encoder_self) {
    for (const AttentionMatrix& head : layer) {
      total += attention_locality(head, window);
      ++count;
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

}  // namespace ocrfix
