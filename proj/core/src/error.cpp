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

#include "ocrfix/error.hpp"

namespace ocrfix {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MissingField: return "MissingField";
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::ScoreLengthMismatch: return "ScoreLengthMismatch";
    case Errc::ScoreOutOfRange: return "ScoreOutOfRange";
    case Errc::EmptyText: return "EmptyText";
    case Errc::BadFractions: return "BadFractions";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::IoFailure: return "IoFailure";
    case Errc::InvalidUtf8: return "InvalidUtf8";
    case Errc::EmptyPool: return "EmptyPool";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::BadConfig: return "BadConfig";
    case Errc::TargetTooSmall: return "TargetTooSmall";
    case Errc::SpanOutOfRange: return "SpanOutOfRange";
    case Errc::BadBucket: return "BadBucket";
    case Errc::UnknownId: return "UnknownId";
    case Errc::BadVocabFile: return "BadVocabFile";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::InvalidDistribution: return "InvalidDistribution";
    case Errc::NonScalarLoss: return "NonScalarLoss";
    case Errc::BadCheckpoint: return "BadCheckpoint";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::TooLong: return "TooLong";
    case Errc::BadEpsilon: return "BadEpsilon";
    case Errc::DivergedLoss: return "DivergedLoss";
    case Errc::OutOfBudget: return "OutOfBudget";
    case Errc::EmptyReference: return "EmptyReference";
    case Errc::AlignmentFailure: return "AlignmentFailure";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
  }
  return "Unknown";
}

}  // namespace ocrfix
