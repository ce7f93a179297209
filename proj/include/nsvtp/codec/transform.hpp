#pragma once

#include <zlib.h>

#include <cstdint>
#include <string>
#include <vector>

#include "nsvtp/bytes.hpp"
#include "nsvtp/error.hpp"

namespace nsvtp::codec {

// A reversible byte-level payload transform. Chains apply front to back and
// invert back to front.
struct PayloadTransform {
  enum class Kind { Identity, Compress, Keyed };

  Kind kind = Kind::Identity;
  Bytes key;  // Keyed only

  static PayloadTransform identity() { return {}; }
  static PayloadTransform compress() { return {Kind::Compress, {}}; }
  static PayloadTransform keyed(Bytes key) { return {Kind::Keyed, std::move(key)}; }

  bool operator==(const PayloadTransform&) const = default;
};

using TransformChain = std::vector<PayloadTransform>;

namespace detail {

// Decompression refuses to allocate past this, so a forged length prefix
// cannot balloon memory.
inline constexpr std::size_t kMaxInflatedSize = 16u << 20;

inline Bytes deflate_payload(ByteView in) {
  if (in.size() > kMaxInflatedSize) {
    fail(ErrorCode::SegmentTooLarge, "payload too large to compress");
  }
  uLongf bound = compressBound(static_cast<uLong>(in.size()));
  Bytes out(4 + bound);
  const auto n = static_cast<std::uint32_t>(in.size());
  out[0] = static_cast<std::uint8_t>(n >> 24);
  out[1] = static_cast<std::uint8_t>(n >> 16);
  out[2] = static_cast<std::uint8_t>(n >> 8);
  out[3] = static_cast<std::uint8_t>(n);
  const int rc = compress2(out.data() + 4, &bound, in.data(),
                           static_cast<uLong>(in.size()), Z_BEST_COMPRESSION);
  if (rc != Z_OK) fail(ErrorCode::CorruptPayload, "zlib compress failed");
  out.resize(4 + bound);
  return out;
}

inline Bytes inflate_payload(ByteView in) {
  if (in.size() < 4) fail(ErrorCode::CorruptPayload, "compressed payload truncated");
  const std::size_t n = (std::size_t{in[0]} << 24) | (std::size_t{in[1]} << 16) |
                        (std::size_t{in[2]} << 8) | in[3];
  if (n > kMaxInflatedSize) {
    fail(ErrorCode::CorruptPayload, "declared inflated size too large");
  }
  Bytes out(n);
  uLongf got = static_cast<uLongf>(n);
  // uncompress rejects a null destination even for empty output
  std::uint8_t scratch = 0;
  const int rc = uncompress(n ? out.data() : &scratch, &got, in.data() + 4,
                            static_cast<uLong>(in.size() - 4));
  if (rc != Z_OK || got != n) {
    fail(ErrorCode::CorruptPayload, "zlib stream is corrupt");
  }
  return out;
}

inline void xor_keystream(Bytes& data, ByteView key) {
  std::uint64_t state = fnv1a64(key) ^ 0x6a09e667f3bcc909ULL;
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (i % 8 == 0) word = splitmix64(state);
    data[i] ^= static_cast<std::uint8_t>(word >> (8 * (i % 8)));
  }
}

inline std::uint64_t keyed_tag(ByteView key, ByteView plain) {
  return fnv1a64(plain, fnv1a64(key));
}

inline Bytes seal_keyed(ByteView in, ByteView key) {
  if (key.empty()) fail(ErrorCode::TransformMismatch, "keyed transform without key");
  Bytes out(in.begin(), in.end());
  const auto tag = keyed_tag(key, in);
  for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(tag >> s));
  xor_keystream(out, key);
  return out;
}

inline Bytes open_keyed(ByteView in, ByteView key) {
  if (key.empty()) fail(ErrorCode::TransformMismatch, "keyed transform without key");
  if (in.size() < 8) fail(ErrorCode::CorruptPayload, "keyed payload truncated");
  Bytes buf(in.begin(), in.end());
  xor_keystream(buf, key);
  std::uint64_t tag = 0;
  for (std::size_t i = buf.size() - 8; i < buf.size(); ++i) tag = (tag << 8) | buf[i];
  buf.resize(buf.size() - 8);
  if (tag != keyed_tag(key, buf)) {
    fail(ErrorCode::CorruptPayload, "keyed payload failed integrity check");
  }
  return buf;
}

}  // namespace detail

inline Bytes apply_transforms(ByteView payload, const TransformChain& chain) {
  Bytes cur(payload.begin(), payload.end());
  for (const auto& t : chain) {
    switch (t.kind) {
      case PayloadTransform::Kind::Identity: break;
      case PayloadTransform::Kind::Compress: cur = detail::deflate_payload(cur); break;
      case PayloadTransform::Kind::Keyed: cur = detail::seal_keyed(cur, t.key); break;
    }
  }
  return cur;
}

inline Bytes invert_transforms(ByteView payload, const TransformChain& chain) {
  Bytes cur(payload.begin(), payload.end());
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    switch (it->kind) {
      case PayloadTransform::Kind::Identity: break;
      case PayloadTransform::Kind::Compress: cur = detail::inflate_payload(cur); break;
      case PayloadTransform::Kind::Keyed: cur = detail::open_keyed(cur, it->key); break;
    }
  }
  return cur;
}

}  // namespace nsvtp::codec
