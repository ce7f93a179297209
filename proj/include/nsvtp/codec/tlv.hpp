#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nsvtp/bytes.hpp"
#include "nsvtp/error.hpp"

namespace nsvtp::codec {

enum class TlvType : std::uint8_t {
  Blueprint = 0x10,
  Status = 0x11,
  Tweak = 0x20,
};

inline bool is_known_tlv_type(std::uint8_t raw) {
  return raw == 0x10 || raw == 0x11 || raw == 0x20;
}

inline constexpr std::size_t kTlvHeaderSize = 3;
inline constexpr std::size_t kMaxTlvValue = 0xffff;

struct TlvElement {
  TlvType type;
  Bytes value;  // empty value is the elision marker for segment types

  bool operator==(const TlvElement&) const = default;
};

// Appends 1 type byte, 2-byte big-endian length and the value.
inline void append_tlv(Bytes& out, TlvType type, ByteView value) {
  if (value.size() > kMaxTlvValue) {
    fail(ErrorCode::LengthOverflow,
         "TLV value of " + std::to_string(value.size()) +
             " bytes exceeds 65535");
  }
  out.push_back(static_cast<std::uint8_t>(type));
  out.push_back(static_cast<std::uint8_t>(value.size() >> 8));
  out.push_back(static_cast<std::uint8_t>(value.size() & 0xff));
  out.insert(out.end(), value.begin(), value.end());
}

inline Bytes envelope_tlv(TlvType type, ByteView value) {
  Bytes out;
  out.reserve(kTlvHeaderSize + value.size());
  append_tlv(out, type, value);
  return out;
}

// Consumes the whole stream or throws.
inline std::vector<TlvElement> parse_tlv_stream(ByteView data) {
  std::vector<TlvElement> out;
  std::size_t pos = 0;
  while (pos < data.size()) {
    if (data.size() - pos < kTlvHeaderSize) {
      fail(ErrorCode::TruncatedStream,
           "TLV header truncated at offset " + std::to_string(pos));
    }
    const auto raw_type = data[pos];
    if (!is_known_tlv_type(raw_type)) {
      fail(ErrorCode::UnknownTlvType,
           "unknown TLV type 0x" + to_hex(data.subspan(pos, 1)) +
               " at offset " + std::to_string(pos));
    }
    const std::size_t length =
        (std::size_t{data[pos + 1]} << 8) | data[pos + 2];
    pos += kTlvHeaderSize;
    if (data.size() - pos < length) {
      fail(ErrorCode::TruncatedStream,
           "TLV value needs " + std::to_string(length) + " bytes, " +
               std::to_string(data.size() - pos) + " remain");
    }
    auto value = data.subspan(pos, length);
    out.push_back({static_cast<TlvType>(raw_type), Bytes(value.begin(), value.end())});
    pos += length;
  }
  return out;
}

}  // namespace nsvtp::codec
