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

#include <string>
#include <string_view>

namespace ocrfix::unicode {

// Decodes UTF-8 into Unicode scalar values. Throws Error(InvalidUtf8) on
// malformed input, overlong forms, surrogates, or values above U+10FFFF.
std::u32string decode(std::string_view utf8);

std::string encode(std::u32string_view text);
std::string encode(char32_t cp);

// Number of scalar values in a UTF-8 string (validating).
std::size_t length(std::string_view utf8);

bool is_space(char32_t cp) noexcept;

// Canonical composition (NFC).
std::string nfc(std::string_view utf8);

// Strips leading/trailing whitespace code points.
std::u32string trim(std::u32string_view text);

}  // namespace ocrfix::unicode
