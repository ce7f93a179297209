#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nsvtp/bytes.hpp"
#include "nsvtp/codec/base64url.hpp"
#include "nsvtp/codec/status_record.hpp"
#include "nsvtp/codec/tlv.hpp"
#include "nsvtp/codec/transform.hpp"
#include "nsvtp/error.hpp"

namespace nsvtp::codec {

inline constexpr char kAppendixDelimiter = '#';
inline constexpr std::uint8_t kCapsuleVersion = 1;

class ResourceId {
 public:
  ResourceId() = default;
  explicit ResourceId(std::string text) : text_(std::move(text)) {
    if (text_.empty()) fail(ErrorCode::InvalidResourceId, "resource id is empty");
    if (text_.find(kAppendixDelimiter) != std::string::npos) {
      fail(ErrorCode::IdContainsDelimiter,
           "resource id '" + text_ + "' contains the appendix delimiter '#'");
    }
    if (!is_valid_utf8(text_)) {
      fail(ErrorCode::InvalidResourceId, "resource id is not valid UTF-8");
    }
  }

  const std::string& str() const { return text_; }

  auto operator<=>(const ResourceId&) const = default;

 private:
  std::string text_;
};

enum class Direction : std::uint8_t { Northwise = 0x01, Southwise = 0x02 };

inline std::string_view direction_name(Direction d) {
  return d == Direction::Northwise ? "northwise" : "southwise";
}

struct CapsuleFlags {
  static constexpr std::uint8_t kBlueprintCompressed = 0x01;
  static constexpr std::uint8_t kStatusCompressed = 0x02;
  static constexpr std::uint8_t kEncrypted = 0x04;
  static constexpr std::uint8_t kJointEncoding = 0x08;
  static constexpr std::uint8_t kAll = 0x0f;

  std::uint8_t bits = kBlueprintCompressed | kStatusCompressed;

  bool blueprint_compressed() const { return bits & kBlueprintCompressed; }
  bool status_compressed() const { return bits & kStatusCompressed; }
  bool encrypted() const { return bits & kEncrypted; }
  bool joint() const { return bits & kJointEncoding; }

  // Compress per segment, optionally encrypt. This is the default layout.
  static CapsuleFlags per_segment(bool compress = true, bool encrypt = false) {
    std::uint8_t b = compress ? (kBlueprintCompressed | kStatusCompressed) : 0;
    if (encrypt) b |= kEncrypted;
    return {b};
  }
  // Segments concatenated first, then compressed (and optionally encrypted)
  // as one body.
  static CapsuleFlags joint_encoding(bool encrypt = false) {
    return {static_cast<std::uint8_t>(kJointEncoding | (encrypt ? kEncrypted : 0))};
  }

  bool operator==(const CapsuleFlags&) const = default;
};

struct CapsuleHeader {
  Direction direction = Direction::Northwise;
  std::uint8_t version = kCapsuleVersion;
  CapsuleFlags flags;

  bool operator==(const CapsuleHeader&) const = default;
};

struct SegmentSlot {
  enum class State { Present, Elided };

  State state = State::Present;
  Bytes bytes;  // meaningful only when Present

  static SegmentSlot present(Bytes b) { return {State::Present, std::move(b)}; }
  static SegmentSlot present(std::string_view text) { return present(to_bytes(text)); }
  static SegmentSlot elided() { return {State::Elided, {}}; }

  bool is_present() const { return state == State::Present; }

  bool operator==(const SegmentSlot&) const = default;
};

struct Capsule {
  CapsuleHeader header;
  std::optional<SegmentSlot> blueprint;
  std::optional<SegmentSlot> status;
  std::vector<Bytes> tweaks;  // Southwise only

  static Capsule northwise(std::optional<std::string_view> blueprint_text,
                           const std::optional<StatusRecord>& status = std::nullopt,
                           CapsuleFlags flags = {}) {
    Capsule c;
    c.header = {Direction::Northwise, kCapsuleVersion, flags};
    if (blueprint_text) c.blueprint = SegmentSlot::present(*blueprint_text);
    if (status) c.status = SegmentSlot::present(status->to_canonical_json());
    return c;
  }

  static Capsule southwise(std::vector<std::string> tweak_texts,
                           const std::optional<StatusRecord>& status = std::nullopt,
                           CapsuleFlags flags = {}) {
    Capsule c;
    c.header = {Direction::Southwise, kCapsuleVersion, flags};
    for (auto& t : tweak_texts) c.tweaks.push_back(to_bytes(t));
    if (status) c.status = SegmentSlot::present(status->to_canonical_json());
    return c;
  }

  bool empty() const { return !blueprint && !status && tweaks.empty(); }

  std::optional<StatusRecord> status_record() const {
    if (!status || !status->is_present()) return std::nullopt;
    return StatusRecord::from_json(to_string(status->bytes));
  }

  bool operator==(const Capsule&) const = default;
};

struct ExtendedResourceId {
  ResourceId id;
  std::optional<Capsule> appendix;

  bool operator==(const ExtendedResourceId&) const = default;
};

// Last Present value of each segment seen on one directed pathway.
struct ElisionContext {
  std::optional<Bytes> blueprint;
  std::optional<Bytes> status;

  void observe(const Capsule& c) {
    if (c.blueprint && c.blueprint->is_present()) blueprint = c.blueprint->bytes;
    if (c.status && c.status->is_present()) status = c.status->bytes;
  }

  bool operator==(const ElisionContext&) const = default;
};

// The bytes before the delimiter. This is all a middle component ever reads.
inline std::string_view bare_name(std::string_view xid) {
  return xid.substr(0, xid.find(kAppendixDelimiter));
}

namespace detail {

inline void check_capsule_shape(const Capsule& c) {
  if (c.header.version != kCapsuleVersion) {
    fail(ErrorCode::UnknownVersion,
         "capsule version " + std::to_string(c.header.version) + " is not supported");
  }
  if ((c.header.flags.bits & ~CapsuleFlags::kAll) != 0) {
    fail(ErrorCode::InvalidCapsule, "capsule header carries unknown flag bits");
  }
  if (c.header.flags.joint() &&
      (c.header.flags.blueprint_compressed() || c.header.flags.status_compressed())) {
    fail(ErrorCode::InvalidCapsule,
         "joint encoding excludes per-segment compression flags");
  }
  if (c.header.direction == Direction::Northwise && !c.tweaks.empty()) {
    fail(ErrorCode::InvalidCapsule, "northwise capsules carry no tweaks");
  }
  if (c.header.direction == Direction::Southwise && c.blueprint) {
    fail(ErrorCode::InvalidCapsule, "southwise capsules carry no blueprint segment");
  }
}

inline TransformChain segment_chain(bool compressed, bool encrypted, ByteView key) {
  TransformChain chain;
  if (compressed) chain.push_back(PayloadTransform::compress());
  if (encrypted) chain.push_back(PayloadTransform::keyed(Bytes(key.begin(), key.end())));
  return chain;
}

inline void require_key(const CapsuleFlags& flags, ByteView key) {
  if (flags.encrypted() && key.empty()) {
    fail(ErrorCode::TransformMismatch,
         "capsule header says encrypted but no pathway key is configured");
  }
}

// Emits one segment TLV: zero-length when it can be re-hydrated from ctx.
inline void emit_segment(Bytes& body, TlvType type, const SegmentSlot& slot,
                         const std::optional<Bytes>& last, const TransformChain& chain,
                         std::string_view label) {
  const bool elide = slot.state == SegmentSlot::State::Elided ||
                     (last.has_value() && *last == slot.bytes);
  if (elide) {
    if (!last) {
      fail(ErrorCode::ElisionWithoutContext,
           std::string(label) + " segment elided but the pathway has no prior value");
    }
    append_tlv(body, type, {});
    return;
  }
  if (slot.bytes.empty()) {
    fail(ErrorCode::EmptySegment, std::string(label) + " segment is empty");
  }
  auto value = apply_transforms(slot.bytes, chain);
  if (value.size() > kMaxTlvValue) {
    fail(ErrorCode::SegmentTooLarge,
         std::string(label) + " segment encodes to " + std::to_string(value.size()) +
             " bytes, limit is 65535");
  }
  append_tlv(body, type, value);
}

}  // namespace detail

// Wire form: <id> ['#' base64url(direction | version | flags | TLV*)].
inline std::string encode_extended_id(const ExtendedResourceId& xid,
                                      const ElisionContext& ctx, ByteView key = {}) {
  // Re-validate: a default-constructed ResourceId is empty.
  ResourceId checked(xid.id.str());
  if (!xid.appendix || xid.appendix->empty()) return checked.str();

  const Capsule& c = *xid.appendix;
  detail::check_capsule_shape(c);
  const auto& flags = c.header.flags;
  detail::require_key(flags, key);

  if (c.status && c.status->is_present()) {
    const auto text = to_string(c.status->bytes);
    if (StatusRecord::from_json(text).to_canonical_json() != text) {
      fail(ErrorCode::InvalidCapsule, "status segment is not canonical JSON");
    }
  }

  const bool joint = flags.joint();
  const bool enc = flags.encrypted() && !joint;
  const auto bp_chain = joint ? TransformChain{}
                              : detail::segment_chain(flags.blueprint_compressed(), enc, key);
  const auto st_chain = joint ? TransformChain{}
                              : detail::segment_chain(flags.status_compressed(), enc, key);
  const auto tw_chain = joint ? TransformChain{} : detail::segment_chain(false, enc, key);

  Bytes body;
  if (c.blueprint) {
    detail::emit_segment(body, TlvType::Blueprint, *c.blueprint, ctx.blueprint, bp_chain,
                         "blueprint");
  }
  if (c.status) {
    detail::emit_segment(body, TlvType::Status, *c.status, ctx.status, st_chain, "status");
  }
  for (const auto& tweak : c.tweaks) {
    if (tweak.empty()) fail(ErrorCode::EmptySegment, "tweak payload is empty");
    auto value = apply_transforms(tweak, tw_chain);
    if (value.size() > kMaxTlvValue) {
      fail(ErrorCode::SegmentTooLarge, "tweak encodes past 65535 bytes");
    }
    append_tlv(body, TlvType::Tweak, value);
  }

  if (joint) {
    body = apply_transforms(body, detail::segment_chain(true, flags.encrypted(), key));
  }

  Bytes appendix{static_cast<std::uint8_t>(c.header.direction), c.header.version,
                 flags.bits};
  appendix.insert(appendix.end(), body.begin(), body.end());
  return checked.str() + kAppendixDelimiter + base64url_encode(appendix);
}

inline ExtendedResourceId decode_extended_id(std::string_view data, const ElisionContext& ctx,
                                             ByteView key = {}) {
  if (!is_valid_utf8(data)) fail(ErrorCode::MalformedAppendix, "extended id is not UTF-8");
  const auto hash = data.find(kAppendixDelimiter);
  ExtendedResourceId out{ResourceId(std::string(data.substr(0, hash))), std::nullopt};
  if (hash == std::string_view::npos) return out;

  auto raw = base64url_decode(data.substr(hash + 1));
  if (!raw) fail(ErrorCode::MalformedAppendix, "appendix is not valid base64url");
  if (raw->size() < 3) fail(ErrorCode::MalformedAppendix, "capsule header truncated");

  Capsule c;
  const auto dir = (*raw)[0];
  if (dir != 0x01 && dir != 0x02) {
    fail(ErrorCode::MalformedAppendix, "unknown capsule direction byte");
  }
  c.header.direction = static_cast<Direction>(dir);
  c.header.version = (*raw)[1];
  if (c.header.version != kCapsuleVersion) {
    fail(ErrorCode::UnknownVersion,
         "capsule version " + std::to_string(c.header.version) + " is not supported");
  }
  c.header.flags.bits = (*raw)[2];
  const auto& flags = c.header.flags;
  if ((flags.bits & ~CapsuleFlags::kAll) != 0) {
    fail(ErrorCode::MalformedAppendix, "capsule header carries unknown flag bits");
  }
  if (flags.joint() && (flags.blueprint_compressed() || flags.status_compressed())) {
    fail(ErrorCode::MalformedAppendix, "joint encoding with per-segment compression flags");
  }
  detail::require_key(flags, key);

  Bytes body(raw->begin() + 3, raw->end());
  const bool joint = flags.joint();
  if (joint) {
    body = invert_transforms(body, detail::segment_chain(true, flags.encrypted(), key));
  }

  std::vector<TlvElement> elements;
  try {
    elements = parse_tlv_stream(body);
  } catch (const Error& e) {
    fail(ErrorCode::MalformedAppendix, std::string("bad TLV stream: ") + e.render());
  }

  const bool enc = flags.encrypted() && !joint;
  // Expected order: blueprint?, status?, tweak*
  int stage = 0;
  for (auto& el : elements) {
    switch (el.type) {
      case TlvType::Blueprint:
      case TlvType::Status: {
        const bool is_bp = el.type == TlvType::Blueprint;
        const int my_stage = is_bp ? 1 : 2;
        if (stage >= my_stage) fail(ErrorCode::MalformedAppendix, "segment out of order");
        stage = my_stage;
        const auto& last = is_bp ? ctx.blueprint : ctx.status;
        SegmentSlot slot;
        if (el.value.empty()) {
          if (!last) {
            fail(ErrorCode::ElisionWithoutContext,
                 std::string(is_bp ? "blueprint" : "status") +
                     " segment elided but the pathway has no prior value");
          }
          slot = SegmentSlot::present(*last);
        } else {
          const auto chain = joint ? TransformChain{}
                                   : detail::segment_chain(is_bp ? flags.blueprint_compressed()
                                                                 : flags.status_compressed(),
                                                           enc, key);
          auto plain = invert_transforms(el.value, chain);
          if (plain.empty()) fail(ErrorCode::MalformedAppendix, "segment decodes to nothing");
          slot = SegmentSlot::present(std::move(plain));
        }
        if (is_bp) {
          c.blueprint = std::move(slot);
        } else {
          const auto text = to_string(slot.bytes);
          if (StatusRecord::from_json(text).to_canonical_json() != text) {
            fail(ErrorCode::MalformedAppendix, "status segment is not canonical JSON");
          }
          c.status = std::move(slot);
        }
        break;
      }
      case TlvType::Tweak: {
        stage = 3;
        if (el.value.empty()) fail(ErrorCode::MalformedAppendix, "empty tweak TLV");
        auto plain = invert_transforms(el.value,
                                       joint ? TransformChain{}
                                             : detail::segment_chain(false, enc, key));
        if (plain.empty()) fail(ErrorCode::MalformedAppendix, "tweak decodes to nothing");
        c.tweaks.push_back(std::move(plain));
        break;
      }
    }
  }
  if (c.empty()) fail(ErrorCode::MalformedAppendix, "capsule carries no segments");
  if (c.header.direction == Direction::Northwise && !c.tweaks.empty()) {
    fail(ErrorCode::MalformedAppendix, "northwise capsule carries tweaks");
  }
  if (c.header.direction == Direction::Southwise && c.blueprint) {
    fail(ErrorCode::MalformedAppendix, "southwise capsule carries a blueprint");
  }
  out.appendix = std::move(c);
  return out;
}

}  // namespace nsvtp::codec
