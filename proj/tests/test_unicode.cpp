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

#include "ocrfix/error.hpp"
#include "ocrfix/random.hpp"
#include "ocrfix/unicode.hpp"

namespace ocrfix {
namespace {

TEST(Unicode, DecodesMixedWidths) {
  const std::u32string cps = unicode::decode("a\xC3\xA9\xE0\xBD\x80\xF0\x9F\x98\x80");
  EXPECT_EQ(cps, (std::u32string{U'a', U'é', U'ཀ', U'\U0001F600'}));
  EXPECT_EQ(unicode::length("a\xC3\xA9\xE0\xBD\x80\xF0\x9F\x98\x80"), 4u);
}

TEST(Unicode, EncodeDecodeRoundTripFuzz) {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    std::u32string text;
    const std::size_t n = uniform_index(rng, 20);
    for (std::size_t i = 0; i < n; ++i) {
      char32_t cp = 0;
      do {
        cp = static_cast<char32_t>(uniform_index(rng, 0x110000));
      } while (cp >= 0xD800 && cp <= 0xDFFF);
      text.push_back(cp);
    }
    EXPECT_EQ(unicode::decode(unicode::encode(text)), text);
  }
}

TEST(Unicode, RejectsMalformedInput) {
  for (const char* bad : {"\x80", "\xC3", "\xE0\xBD", "\xC0\xAF", "\xED\xA0\x80", "\xF8\x88\x80\x80\x80"}) {
    try {
      unicode::decode(bad);
      ADD_FAILURE() << "accepted malformed input";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::InvalidUtf8);
    }
  }
}

TEST(Unicode, NfcComposes) {
  EXPECT_EQ(unicode::nfc("e\xCC\x81"), "\xC3\xA9");
  EXPECT_EQ(unicode::nfc("plain"), "plain");
}

TEST(Unicode, TrimRemovesOuterWhitespaceOnly) {
  EXPECT_EQ(unicode::trim(U"  a b \t"), U"a b");
  EXPECT_EQ(unicode::trim(U" \n "), U"");
  EXPECT_TRUE(unicode::is_space(U' '));
  EXPECT_FALSE(unicode::is_space(U'་'));
}

}  // namespace
}  // namespace ocrfix
