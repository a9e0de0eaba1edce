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

#include "ocrfix/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "ocrfix/error.hpp"
#include "ocrfix/unicode.hpp"

namespace ocrfix {

namespace {

const std::u32string kSpecialNames[kNumSpecials] = {U"<pad>", U"<s>", U"</s>", U"<unk>"};
constexpr char32_t kReplacementChar = 0xFFFD;

// Splits text into maximal non-whitespace runs and single whitespace
// characters, reporting each unit with its code-point offset.
template <typename Fn>
void for_each_unit(std::u32string_view text, Fn&& fn) {
  std::size_t i = 0;
  while (i < text.size()) {
    if (unicode::is_space(text[i])) {
      fn(text.substr(i, 1), i, true);
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && !unicode::is_space(text[j])) ++j;
    fn(text.substr(i, j - i), i, false);
    i = j;
  }
}

std::string escape_token(const std::u32string& token) {
  std::string out;
  for (char32_t cp : token) {
    switch (cp) {
      case U'\\': out += "\\\\"; break;
      case U' ': out += "\\s"; break;
      case U'\t': out += "\\t"; break;
      case U'\n': out += "\\n"; break;
      case U'\r': out += "\\r"; break;
      default:
        if (cp < 0x20 || unicode::is_space(cp)) {
          std::ostringstream hex;
          hex << "\\u{" << std::hex << static_cast<std::uint32_t>(cp) << '}';
          out += hex.str();
        } else {
          out += unicode::encode(cp);
        }
    }
  }
  return out;
}

std::u32string unescape_token(std::string_view text) {
  std::u32string raw = unicode::decode(text);
  std::u32string out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != U'\\') {
      out.push_back(raw[i]);
      continue;
    }
    if (++i >= raw.size()) throw Error(Errc::BadVocabFile, "dangling escape");
    switch (raw[i]) {
      case U'\\': out.push_back(U'\\'); break;
      case U's': out.push_back(U' '); break;
      case U't': out.push_back(U'\t'); break;
      case U'n': out.push_back(U'\n'); break;
      case U'r': out.push_back(U'\r'); break;
      case U'u': {
        const auto close = raw.find(U'}', i);
        if (i + 1 >= raw.size() || raw[i + 1] != U'{' || close == std::u32string::npos) {
          throw Error(Errc::BadVocabFile, "bad \\u escape");
        }
        std::string hex = unicode::encode(raw.substr(i + 2, close - i - 2));
        out.push_back(static_cast<char32_t>(std::stoul(hex, nullptr, 16)));
        i = close;
        break;
      }
      default:
        throw Error(Errc::BadVocabFile, "unknown escape");
    }
  }
  return out;
}

}  // namespace

int BpeVocab::add_token(const std::u32string& surface) {
  if (auto it = token_to_id_.find(surface); it != token_to_id_.end()) return it->second;
  const int id = static_cast<int>(id_to_token_.size());
  id_to_token_.push_back(surface);
  token_to_id_.emplace(surface, id);
  return id;
}

void BpeVocab::add_merge(const std::u32string& left, const std::u32string& right) {
  const int l = id_of(left);
  const int r = id_of(right);
  if (l == kUnkId || r == kUnkId) throw Error(Errc::BadVocabFile, "merge of unknown tokens");
  const int merged = add_token(left + right);
  const int rank = static_cast<int>(merges_.size());
  merges_.emplace_back(left, right);
  merge_table_.try_emplace({l, r}, rank, merged);
}

const std::u32string& BpeVocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw Error(Errc::UnknownId, "token id " + std::to_string(id));
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

int BpeVocab::id_of(std::u32string_view surface) const {
  auto it = token_to_id_.find(std::u32string(surface));
  return it == token_to_id_.end() ? kUnkId : it->second;
}

BpeVocab BpeVocab::train(std::span<const std::string> corpus, std::size_t target_size) {
  std::unordered_map<std::u32string, long> unit_counts;
  std::set<char32_t> chars;
  for (const auto& line : corpus) {
    const std::u32string text = unicode::decode(line);
    for_each_unit(text, [&](std::u32string_view unit, std::size_t, bool space) {
      for (char32_t cp : unit) chars.insert(cp);
      if (!space) ++unit_counts[std::u32string(unit)];
    });
  }
  if (target_size < chars.size() + kNumSpecials) {
    throw Error(Errc::TargetTooSmall, "target " + std::to_string(target_size) + " < " +
                                          std::to_string(chars.size() + kNumSpecials) +
                                          " (characters + specials)");
  }

  BpeVocab v;
  v.target_size_ = target_size;
  for (const auto& name : kSpecialNames) v.id_to_token_.push_back(name);
  for (char32_t cp : chars) v.add_token(std::u32string(1, cp));
  v.base_size_ = v.id_to_token_.size();

  struct Word {
    std::vector<int> syms;
    long freq;
  };
  // Sorted so pair bookkeeping is independent of hash iteration order.
  std::vector<std::pair<std::u32string, long>> sorted_units(unit_counts.begin(), unit_counts.end());
  std::sort(sorted_units.begin(), sorted_units.end());
  std::vector<Word> words;
  words.reserve(sorted_units.size());
  for (const auto& [unit, freq] : sorted_units) {
    Word w{{}, freq};
    for (char32_t cp : unit) w.syms.push_back(v.id_of(std::u32string(1, cp)));
    words.push_back(std::move(w));
  }

  using Pair = std::pair<int, int>;
  struct Entry {
    long count;
    Pair pair;
  };
  const auto& toks = v.id_to_token_;
  auto before = [&toks](const Entry& x, const Entry& y) {
    if (x.count != y.count) return x.count > y.count;
    const auto& xa = toks[static_cast<std::size_t>(x.pair.first)];
    const auto& ya = toks[static_cast<std::size_t>(y.pair.first)];
    if (xa != ya) return xa < ya;
    return toks[static_cast<std::size_t>(x.pair.second)] < toks[static_cast<std::size_t>(y.pair.second)];
  };
  std::set<Entry, decltype(before)> ranked(before);
  std::unordered_map<Pair, long, PairHash> counts;
  std::unordered_map<Pair, std::vector<std::size_t>, PairHash> where;

  auto bump = [&](Pair p, long delta) {
    long& c = counts[p];
    if (c > 0) ranked.erase(Entry{c, p});
    c += delta;
    if (c > 0) ranked.insert(Entry{c, p});
  };
  auto account = [&](std::size_t wi, long sign) {
    const Word& w = words[wi];
    for (std::size_t k = 0; k + 1 < w.syms.size(); ++k) {
      const Pair p{w.syms[k], w.syms[k + 1]};
      bump(p, sign * w.freq);
      if (sign > 0) where[p].push_back(wi);
    }
  };
  for (std::size_t wi = 0; wi < words.size(); ++wi) account(wi, +1);

  std::vector<std::size_t> stamp(words.size(), 0);
  std::size_t generation = 0;
  while (v.size() < target_size && !ranked.empty()) {
    const Entry best = *ranked.begin();
    if (best.count < 2) break;
    const Pair p = best.pair;
    const std::u32string left = toks[static_cast<std::size_t>(p.first)];
    const std::u32string right = toks[static_cast<std::size_t>(p.second)];
    v.add_merge(left, right);
    const int merged = v.id_of(left + right);

    ++generation;
    std::vector<std::size_t> affected = std::move(where[p]);
    where.erase(p);
    for (std::size_t wi : affected) {
      if (stamp[wi] == generation) continue;
      stamp[wi] = generation;
      Word& w = words[wi];
      bool present = false;
      for (std::size_t k = 0; k + 1 < w.syms.size(); ++k) {
        if (w.syms[k] == p.first && w.syms[k + 1] == p.second) {
          present = true;
          break;
        }
      }
      if (!present) continue;
      account(wi, -1);
      std::vector<int> next;
      next.reserve(w.syms.size());
      for (std::size_t k = 0; k < w.syms.size(); ++k) {
        if (k + 1 < w.syms.size() && w.syms[k] == p.first && w.syms[k + 1] == p.second) {
          next.push_back(merged);
          ++k;
        } else {
          next.push_back(w.syms[k]);
        }
      }
      w.syms = std::move(next);
      account(wi, +1);
    }
  }
  return v;
}

void BpeVocab::encode_unit(std::u32string_view unit, std::size_t offset, TokenizedSentence& out) const {
  std::vector<int> syms;
  std::vector<Span> spans;
  syms.reserve(unit.size());
  spans.reserve(unit.size());
  for (std::size_t i = 0; i < unit.size(); ++i) {
    syms.push_back(id_of(unit.substr(i, 1)));
    spans.push_back({offset + i, offset + i + 1});
  }
  while (syms.size() > 1) {
    int best_rank = std::numeric_limits<int>::max();
    std::pair<int, int> best{};
    int best_id = -1;
    for (std::size_t k = 0; k + 1 < syms.size(); ++k) {
      auto it = merge_table_.find({syms[k], syms[k + 1]});
      if (it != merge_table_.end() && it->second.first < best_rank) {
        best_rank = it->second.first;
        best = it->first;
        best_id = it->second.second;
      }
    }
    if (best_id < 0) break;
    std::size_t w = 0;
    for (std::size_t k = 0; k < syms.size(); ++k, ++w) {
      if (k + 1 < syms.size() && syms[k] == best.first && syms[k + 1] == best.second) {
        syms[w] = best_id;
        spans[w] = {spans[k].begin, spans[k + 1].end};
        ++k;
      } else {
        syms[w] = syms[k];
        spans[w] = spans[k];
      }
    }
    syms.resize(w);
    spans.resize(w);
  }
  out.ids.insert(out.ids.end(), syms.begin(), syms.end());
  out.spans.insert(out.spans.end(), spans.begin(), spans.end());
}

TokenizedSentence BpeVocab::encode(std::u32string_view text) const {
  TokenizedSentence out;
  for_each_unit(text, [&](std::u32string_view unit, std::size_t offset, bool) {
    encode_unit(unit, offset, out);
  });
  return out;
}

TokenizedSentence BpeVocab::encode(std::string_view utf8) const { return encode(unicode::decode(utf8)); }

std::string BpeVocab::decode(std::span<const int> ids) const {
  std::u32string out;
  for (int id : ids) {
    const std::u32string& surface = token(id);
    if (id == kUnkId) {
      out.push_back(kReplacementChar);
    } else if (!is_special(id)) {
      out += surface;
    }
  }
  return unicode::encode(out);
}

std::string BpeVocab::to_text() const {
  std::ostringstream os;
  os << "bpe-vocab 1 target_size " << target_size_ << '\n';
  for (std::size_t i = 0; i < kNumSpecials; ++i) os << "special " << unicode::encode(kSpecialNames[i]) << '\n';
  for (std::size_t i = kNumSpecials; i < base_size_; ++i) os << "char " << escape_token(id_to_token_[i]) << '\n';
  for (const auto& [l, r] : merges_) os << "merge " << escape_token(l) << ' ' << escape_token(r) << '\n';
  return os.str();
}

BpeVocab BpeVocab::from_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::BadVocabFile, "empty vocabulary file");
  std::istringstream header(line);
  std::string magic, key;
  int version = 0;
  BpeVocab v;
  if (!(header >> magic >> version >> key >> v.target_size_) || magic != "bpe-vocab" || version != 1 ||
      key != "target_size") {
    throw Error(Errc::BadVocabFile, "bad header: " + line);
  }
  std::size_t specials = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    const std::string kind = line.substr(0, sp);
    const std::string rest = sp == std::string::npos ? "" : line.substr(sp + 1);
    if (kind == "special") {
      if (specials >= kNumSpecials || unicode::decode(rest) != kSpecialNames[specials]) {
        throw Error(Errc::BadVocabFile, "unexpected special " + rest);
      }
      v.id_to_token_.push_back(kSpecialNames[specials++]);
    } else if (kind == "char") {
      if (specials != kNumSpecials || !v.merges_.empty()) throw Error(Errc::BadVocabFile, "char out of order");
      const std::u32string tok = unescape_token(rest);
      if (tok.size() != 1) throw Error(Errc::BadVocabFile, "char entry must be one code point");
      v.add_token(tok);
      v.base_size_ = v.id_to_token_.size();
    } else if (kind == "merge") {
      const auto mid = rest.find(' ');
      if (mid == std::string::npos) throw Error(Errc::BadVocabFile, "merge needs two tokens");
      v.add_merge(unescape_token(rest.substr(0, mid)), unescape_token(rest.substr(mid + 1)));
    } else {
      throw Error(Errc::BadVocabFile, "unknown entry: " + kind);
    }
  }
  if (specials != kNumSpecials) throw Error(Errc::BadVocabFile, "missing specials");
  if (v.base_size_ == 0) v.base_size_ = kNumSpecials;
  return v;
}

void BpeVocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out << to_text();
  if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

BpeVocab BpeVocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

std::vector<double> align_scores(std::span<const double> char_scores, std::span<const Span> spans,
                                 ScoreReduction reduction) {
  std::vector<double> out;
  out.reserve(spans.size());
  for (const Span& s : spans) {
    if (s.begin >= s.end || s.end > char_scores.size()) {
      throw Error(Errc::SpanOutOfRange, "span [" + std::to_string(s.begin) + "," + std::to_string(s.end) +
                                            ") over " + std::to_string(char_scores.size()) + " scores");
    }
    const auto first = char_scores.begin() + static_cast<std::ptrdiff_t>(s.begin);
    const auto last = char_scores.begin() + static_cast<std::ptrdiff_t>(s.end);
    if (reduction == ScoreReduction::Min) {
      out.push_back(*std::min_element(first, last));
    } else {
      double sum = 0.0;
      for (auto it = first; it != last; ++it) sum += *it;
      out.push_back(sum / static_cast<double>(s.end - s.begin));
    }
  }
  return out;
}

ConfQuantizer::ConfQuantizer(int mode, double threshold) : mode_(mode), threshold_(threshold) {
  if (mode != 101 && mode != 5 && mode != 2) {
    throw Error(Errc::BadConfig, "confidence vocabulary must be 101, 5 or 2");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error(Errc::BadConfig, "threshold must be in (0,1)");
}

int ConfQuantizer::quantize(double score) const {
  if (!(score >= 0.0 && score <= 1.0)) {
    throw Error(Errc::ScoreOutOfRange, "score " + std::to_string(score));
  }
  switch (mode_) {
    case 101:
      return std::min(100, static_cast<int>(std::floor(score * 100.0 + 0.5 + 1e-9)));
    case 5:
      if (score < 0.2) return 1;
      if (score < 0.4) return 2;
      if (score < 0.6) return 3;
      if (score < 0.8) return 4;
      return 5;
    default:
      return score <= threshold_ ? 0 : 1;
  }
}

double ConfQuantizer::representative(int bucket) const {
  if (bucket < min_bucket() || bucket > max_bucket()) {
    throw Error(Errc::BadBucket, "bucket " + std::to_string(bucket) + " for mode " + std::to_string(mode_));
  }
  switch (mode_) {
    case 101:
      return static_cast<double>(bucket) / 100.0;
    case 5: {
      static constexpr double kMidpoints[] = {0.1, 0.3, 0.5, 0.7, 0.9};
      return kMidpoints[bucket - 1];
    }
    default:
      return bucket == 0 ? threshold_ / 2.0 : (threshold_ + 1.0) / 2.0;
  }
}

}  // namespace ocrfix
