#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

#include "nsvtp/bytes.hpp"
#include "nsvtp/codec/capsule.hpp"
#include "nsvtp/codec/transform.hpp"
#include "nsvtp/error.hpp"
#include "nsvtp/layer.hpp"

namespace nsvtp::tx {

using codec::ResourceId;

// --- sealing ----------------------------------------------------------------
//
// C_s  = keyed_k(compress(blueprint text))
// C'_s = keyed_k'(u16 |k| ‖ k ‖ C_s)

inline Bytes seal_blueprint(std::string_view blueprint_text, ByteView north_key) {
  return codec::apply_transforms(
      to_bytes(blueprint_text),
      {codec::PayloadTransform::compress(),
       codec::PayloadTransform::keyed(Bytes(north_key.begin(), north_key.end()))});
}

inline std::string unseal_blueprint(ByteView sealed, ByteView north_key) {
  return to_string(codec::invert_transforms(
      sealed, {codec::PayloadTransform::compress(),
               codec::PayloadTransform::keyed(Bytes(north_key.begin(), north_key.end()))}));
}

inline Bytes seal_deposit(ByteView capsule, ByteView north_key, ByteView relay_key) {
  if (north_key.size() > 0xffff) fail(ErrorCode::LengthOverflow, "north key too long");
  Bytes inner;
  inner.push_back(static_cast<std::uint8_t>(north_key.size() >> 8));
  inner.push_back(static_cast<std::uint8_t>(north_key.size() & 0xff));
  inner.insert(inner.end(), north_key.begin(), north_key.end());
  inner.insert(inner.end(), capsule.begin(), capsule.end());
  return codec::apply_transforms(
      inner, {codec::PayloadTransform::keyed(Bytes(relay_key.begin(), relay_key.end()))});
}

// Returns (C_s, k).
inline std::pair<Bytes, Bytes> open_deposit(ByteView sealed, ByteView relay_key) {
  const auto inner = codec::invert_transforms(
      sealed, {codec::PayloadTransform::keyed(Bytes(relay_key.begin(), relay_key.end()))});
  if (inner.size() < 2) fail(ErrorCode::CorruptPayload, "deposit envelope truncated");
  const std::size_t klen = (std::size_t{inner[0]} << 8) | inner[1];
  if (inner.size() < 2 + klen) fail(ErrorCode::CorruptPayload, "deposit key truncated");
  const auto split = inner.begin() + 2 + static_cast<std::ptrdiff_t>(klen);
  return {Bytes(split, inner.end()), Bytes(inner.begin() + 2, split)};
}

// --- protocol types ---------------------------------------------------------

struct Deposit {
  Bytes relay_key;   // k'
  Bytes sealed;      // C'_s
  LayerIndex target_layer;
  ResourceId depositor;
};

struct DepositReceipt {
  Bytes relay_key;
  double expires_at = 0.0;
};

struct ClaimRequest {
  Bytes relay_key;    // k', as relayed up the stack
  LayerIndex claimed_layer;
  Bytes south_key;    // k'', for future southwise capsules
};

struct ClaimResult {
  Bytes capsule;    // C_s
  Bytes north_key;  // k
  ResourceId depositor;
  Bytes south_key;  // to be forwarded to the depositor
};

// Ground truth for "which layer is this component on".
class LayerOracle {
 public:
  virtual ~LayerOracle() = default;
  virtual std::optional<LayerIndex> layer_of(const ResourceId& id) const = 0;
};

enum class PathwayMode { ViaTX, Direct };

inline std::string_view mode_name(PathwayMode m) {
  return m == PathwayMode::ViaTX ? "via_tx" : "direct";
}

struct Pathway {
  ResourceId south;
  ResourceId north;
  Bytes north_key;  // k: northwise payloads
  Bytes south_key;  // k'': southwise payloads
  double established_at = 0.0;
  PathwayMode mode = PathwayMode::ViaTX;
};

// --- broker -----------------------------------------------------------------

// Deposit registry. Deposits are single-use and expire after a TTL. All
// operations take the registry lock, so concurrent claims on one relay key
// see exactly one winner.
class TrustedExchange {
 public:
  explicit TrustedExchange(double ttl_seconds = 60.0) : ttl_(ttl_seconds) {}

  double ttl() const { return ttl_; }

  DepositReceipt deposit(Deposit d, double now) {
    if (d.relay_key.empty()) fail(ErrorCode::IncompleteClaim, "deposit without relay key");
    std::lock_guard lock(mu_);
    auto it = entries_.find(d.relay_key);
    if (it != entries_.end() && is_live(it->second, now)) {
      fail(ErrorCode::DuplicateRelayKey,
           "relay key " + to_hex(d.relay_key) + " already has a live deposit");
    }
    const double expires = now + ttl_;
    DepositReceipt receipt{d.relay_key, expires};
    auto key = d.relay_key;
    entries_.insert_or_assign(std::move(key), Entry{std::move(d), expires, false});
    return receipt;
  }

  // Releases (C_s, k) only when the relay key is known and unexpired and the
  // claimed layer matches both the deposit target and the oracle's answer
  // for the requester. A successful claim consumes the deposit.
  ClaimResult claim(const ResourceId& requester, const ClaimRequest& req,
                    const LayerOracle& oracle, double now) {
    if (req.relay_key.empty() || req.south_key.empty()) {
      fail(ErrorCode::IncompleteClaim, "claim must carry relay key, layer and south key");
    }
    std::lock_guard lock(mu_);
    auto it = entries_.find(req.relay_key);
    if (it == entries_.end()) {
      fail(ErrorCode::UnknownRelayKey, "no deposit under relay key " + to_hex(req.relay_key));
    }
    Entry& e = it->second;
    if (e.claimed) fail(ErrorCode::AlreadyClaimed, "deposit was already released");
    if (now >= e.expires_at) fail(ErrorCode::Expired, "deposit expired");
    const auto actual = oracle.layer_of(requester);
    if (req.claimed_layer != e.deposit.target_layer || !actual ||
        *actual != req.claimed_layer) {
      fail(ErrorCode::LayerMismatch,
           "'" + requester.str() + "' claims layer " + req.claimed_layer.str() +
               ", deposit targets layer " + e.deposit.target_layer.str() +
               ", verified layer is " + (actual ? actual->str() : std::string("unknown")));
    }
    auto [capsule, north_key] = open_deposit(e.deposit.sealed, req.relay_key);
    e.claimed = true;
    return {std::move(capsule), std::move(north_key), e.deposit.depositor, req.south_key};
  }

  // Deposits that are neither claimed nor expired.
  std::size_t live_count(double now) const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& [k, e] : entries_) n += is_live(e, now);
    return n;
  }

 private:
  struct Entry {
    Deposit deposit;
    double expires_at;
    bool claimed;
  };

  static bool is_live(const Entry& e, double now) { return !e.claimed && now < e.expires_at; }

  double ttl_;
  mutable std::mutex mu_;
  std::map<Bytes, Entry> entries_;
};

}  // namespace nsvtp::tx
