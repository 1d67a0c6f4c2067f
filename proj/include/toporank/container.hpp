// Copyright 2026 The toporank Authors.
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

// Shared on-disk container used by trace ("TEDT"), model ("TEDM") and
// detector ("TEDD") files:
//
//   magic[4] | version u32le | header_length u32le | header (UTF-8 JSON) | payload
//
// The payload layout is owned by each file kind; this header only frames it.

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "toporank/error.hpp"

namespace toporank::io {

using Json = nlohmann::json;

inline constexpr std::size_t kPrefixBytes = 12;

// Little-endian append/read of fixed-width scalars.
template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.insert(out.end(), bytes, bytes + sizeof(T));
}

template <typename T>
T get_le(const std::uint8_t* in) {
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, in, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

inline std::uint32_t get_be32(const std::uint8_t* in) {
  return (std::uint32_t{in[0]} << 24) | (std::uint32_t{in[1]} << 16) |
         (std::uint32_t{in[2]} << 8) | std::uint32_t{in[3]};
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::kIo, "short write to '" + path + "'");
}

inline std::vector<std::uint8_t> frame(std::string_view magic, std::uint32_t version,
                                       const Json& header,
                                       std::span<const std::uint8_t> payload) {
  require(magic.size() == 4, ErrorCode::kInvalidArgument, "container magic must be 4 bytes");
  const std::string text = header.dump();
  std::vector<std::uint8_t> out;
  out.reserve(kPrefixBytes + text.size() + payload.size());
  out.insert(out.end(), magic.begin(), magic.end());
  put_le<std::uint32_t>(out, version);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

struct Unframed {
  Json header;
  std::span<const std::uint8_t> payload;  // everything after the header
};

inline Unframed unframe(std::span<const std::uint8_t> bytes, std::string_view magic,
                        std::uint32_t version) {
  const std::size_t have_magic = std::min<std::size_t>(bytes.size(), 4);
  if (have_magic > 0 && std::memcmp(bytes.data(), magic.data(), have_magic) != 0) {
    fail(ErrorCode::kBadMagic, "expected magic '" + std::string(magic) + "'");
  }
  require(bytes.size() >= kPrefixBytes, ErrorCode::kTruncated, "file shorter than 12-byte prefix");
  const auto found_version = get_le<std::uint32_t>(bytes.data() + 4);
  require(found_version == version, ErrorCode::kVersionMismatch,
          "format version " + std::to_string(found_version) + ", expected " +
              std::to_string(version));
  const auto header_length = get_le<std::uint32_t>(bytes.data() + 8);
  require(bytes.size() - kPrefixBytes >= header_length, ErrorCode::kTruncated,
          "header truncated");
  Unframed out;
  const auto* begin = reinterpret_cast<const char*>(bytes.data() + kPrefixBytes);
  out.header = Json::parse(begin, begin + header_length, nullptr, /*allow_exceptions=*/false);
  require(!out.header.is_discarded() && out.header.is_object(), ErrorCode::kMalformedHeader,
          "header is not a JSON object");
  out.payload = bytes.subspan(kPrefixBytes + header_length);
  return out;
}

// Runs `body` and converts JSON access failures into kMalformedHeader.
template <typename F>
auto with_header_errors(F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Json::exception& e) {
    fail(ErrorCode::kMalformedHeader, e.what());
  }
}

// Multiplication/addition that report overflow as a malformed header, since
// sizes come from untrusted header fields.
inline std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  require(!__builtin_mul_overflow(a, b, &r), ErrorCode::kMalformedHeader, "size overflow");
  return r;
}

inline std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  require(!__builtin_add_overflow(a, b, &r), ErrorCode::kMalformedHeader, "size overflow");
  return r;
}

inline void require_payload_size(std::span<const std::uint8_t> payload, std::uint64_t expected) {
  require(payload.size() >= expected, ErrorCode::kTruncated,
          "payload has " + std::to_string(payload.size()) + " bytes, expected " +
              std::to_string(expected));
  require(payload.size() == expected, ErrorCode::kTrailingBytes,
          std::to_string(payload.size() - expected) + " unexpected bytes after payload");
}

}  // namespace toporank::io
