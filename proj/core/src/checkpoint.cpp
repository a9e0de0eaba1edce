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

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "tensor_internal.hpp"

namespace ocrfix {

namespace {

constexpr char kMagic[8] = {'O', 'C', 'R', 'F', 'X', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw Error(Errc::BadCheckpoint, "truncated checkpoint " + path.string());
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    for (double x : t.data()) put<double>(out, x);
  }
  out.flush();
  if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

NamedTensors load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(Errc::BadCheckpoint, "not a checkpoint: " + path.string());
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kVersion) throw Error(Errc::BadCheckpoint, "unsupported checkpoint version " + std::to_string(version));
  const auto count = get<std::uint32_t>(in, path);
  NamedTensors tensors;
  tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw Error(Errc::BadCheckpoint, "truncated tensor name");
    const auto rank = get<std::uint32_t>(in, path);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(in, path));
    std::vector<double> data(shape_numel(shape));
    for (double& x : data) x = get<double>(in, path);
    tensors.emplace_back(std::move(name), Tensor::from_data(std::move(shape), std::move(data)));
  }
  return tensors;
}

}  // namespace ocrfix
