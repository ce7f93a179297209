#include <gtest/gtest.h>

#include <atomic>
#include <map>
#include <thread>
#include <vector>

#include "nsvtp/tx/exchange.hpp"

using namespace nsvtp;
using namespace nsvtp::tx;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an nsvtp::Error";
  return ErrorCode::ConfigError;
}

class MapOracle final : public LayerOracle {
 public:
  void set(const std::string& id, int layer) { layers_[id] = layer; }
  std::optional<LayerIndex> layer_of(const ResourceId& id) const override {
    auto it = layers_.find(id.str());
    if (it == layers_.end()) return std::nullopt;
    return LayerIndex{it->second};
  }

 private:
  std::map<std::string, int> layers_;
};

const std::string kBlueprint = "blueprint \"cpu-core/high\" rev 1 {\n}\n";

struct Fixture {
  Bytes k = to_bytes("north key k");
  Bytes k1 = to_bytes("relay key K1");
  Bytes k2 = to_bytes("south key k2");
  MapOracle oracle;

  Fixture() {
    oracle.set("core", 0);
    oracle.set("os", 2);
    oracle.set("runtime", 3);
    oracle.set("app", 4);
  }

  Deposit deposit(int layer = 4) const {
    return {k1, seal_deposit(seal_blueprint(kBlueprint, k), k, k1), LayerIndex{layer}, ResourceId("core")};
  }
};

}  // namespace

TEST(Seal, DepositEnvelopeOpensToCapsuleAndKey) {
  Fixture f;
  const auto cs = seal_blueprint(kBlueprint, f.k);
  const auto [capsule, key] = open_deposit(seal_deposit(cs, f.k, f.k1), f.k1);
  EXPECT_EQ(capsule, cs);
  EXPECT_EQ(key, f.k);
  EXPECT_EQ(unseal_blueprint(capsule, key), kBlueprint);
  EXPECT_EQ(code_of([&] { open_deposit(seal_deposit(cs, f.k, f.k1), f.k2); }), ErrorCode::CorruptPayload);
  EXPECT_EQ(code_of([&] { unseal_blueprint(cs, f.k1); }), ErrorCode::CorruptPayload);
}

TEST(Exchange, DepositCountsAndDuplicates) {
  Fixture f;
  TrustedExchange tx(60.0);
  const auto receipt = tx.deposit(f.deposit(), 1.0);
  EXPECT_EQ(receipt.relay_key, f.k1);
  EXPECT_DOUBLE_EQ(receipt.expires_at, 61.0);
  EXPECT_EQ(tx.live_count(1.0), 1u);
  EXPECT_EQ(code_of([&] { tx.deposit(f.deposit(), 2.0); }), ErrorCode::DuplicateRelayKey);
  EXPECT_EQ(tx.live_count(61.0), 0u);
}

TEST(Exchange, ClaimReleasesCapsuleAndKey) {
  Fixture f;
  TrustedExchange tx;
  tx.deposit(f.deposit(), 0.0);
  const auto got = tx.claim(ResourceId("app"), {f.k1, LayerIndex{4}, f.k2}, f.oracle, 0.5);
  EXPECT_EQ(got.north_key, f.k);
  EXPECT_EQ(got.depositor, ResourceId("core"));
  EXPECT_EQ(got.south_key, f.k2);
  EXPECT_EQ(unseal_blueprint(got.capsule, got.north_key), kBlueprint);
  EXPECT_EQ(tx.live_count(0.5), 0u);
}

TEST(Exchange, SingleUse) {
  Fixture f;
  TrustedExchange tx;
  tx.deposit(f.deposit(), 0.0);
  tx.claim(ResourceId("app"), {f.k1, LayerIndex{4}, f.k2}, f.oracle, 0.0);
  EXPECT_EQ(code_of([&] { tx.claim(ResourceId("app"), {f.k1, LayerIndex{4}, f.k2}, f.oracle, 0.0); }),
            ErrorCode::AlreadyClaimed);
}

TEST(Exchange, ZeroTtlExpiresImmediately) {
  Fixture f;
  TrustedExchange tx(0.0);
  tx.deposit(f.deposit(), 5.0);
  EXPECT_EQ(code_of([&] { tx.claim(ResourceId("app"), {f.k1, LayerIndex{4}, f.k2}, f.oracle, 5.0); }),
            ErrorCode::Expired);
}

TEST(Exchange, ExpiredKeyCanBeDepositedAgain) {
  Fixture f;
  TrustedExchange tx(1.0);
  tx.deposit(f.deposit(), 0.0);
  EXPECT_NO_THROW(tx.deposit(f.deposit(), 1.0));
}

TEST(Exchange, LayerMismatchVariants) {
  Fixture f;
  TrustedExchange tx;
  tx.deposit(f.deposit(4), 0.0);
  // claimed layer disagrees with the deposit target
  EXPECT_EQ(code_of([&] { tx.claim(ResourceId("runtime"), {f.k1, LayerIndex{3}, f.k2}, f.oracle, 0.0); }),
            ErrorCode::LayerMismatch);
  // claimed layer matches the target but the oracle places the requester elsewhere
  EXPECT_EQ(code_of([&] { tx.claim(ResourceId("os"), {f.k1, LayerIndex{4}, f.k2}, f.oracle, 0.0); }),
            ErrorCode::LayerMismatch);
  // requester the oracle does not know
  EXPECT_EQ(code_of([&] { tx.claim(ResourceId("ghost"), {f.k1, LayerIndex{4}, f.k2}, f.oracle, 0.0); }),
            ErrorCode::LayerMismatch);
  // rejected claims leave the deposit for the rightful claimant
  EXPECT_EQ(tx.live_count(0.0), 1u);
  EXPECT_NO_THROW(tx.claim(ResourceId("app"), {f.k1, LayerIndex{4}, f.k2}, f.oracle, 0.0));
}

TEST(Exchange, UnknownAndIncomplete) {
  Fixture f;
  TrustedExchange tx;
  EXPECT_EQ(code_of([&] { tx.claim(ResourceId("app"), {to_bytes("nope"), LayerIndex{4}, f.k2}, f.oracle, 0.0); }),
            ErrorCode::UnknownRelayKey);
  EXPECT_EQ(code_of([&] { tx.claim(ResourceId("app"), {f.k1, LayerIndex{4}, {}}, f.oracle, 0.0); }),
            ErrorCode::IncompleteClaim);
  Deposit d = f.deposit();
  d.relay_key.clear();
  EXPECT_EQ(code_of([&] { tx.deposit(d, 0.0); }), ErrorCode::IncompleteClaim);
}

TEST(Exchange, ConcurrentClaimsHaveOneWinner) {
  Fixture f;
  for (int round = 0; round < 50; ++round) {
    TrustedExchange tx;
    tx.deposit(f.deposit(), 0.0);
    std::atomic<int> wins{0};
    std::atomic<int> already{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < 8; ++t) {
      pool.emplace_back([&] {
        try {
          tx.claim(ResourceId("app"), {f.k1, LayerIndex{4}, f.k2}, f.oracle, 0.0);
          ++wins;
        } catch (const Error& e) {
          if (e.code() == ErrorCode::AlreadyClaimed) ++already;
        }
      });
    }
    for (auto& th : pool) th.join();
    ASSERT_EQ(wins.load(), 1);
    ASSERT_EQ(already.load(), 7);
  }
}

TEST(Exchange, ConcurrentDepositsOfDistinctKeys) {
  Fixture f;
  TrustedExchange tx;
  std::vector<std::thread> pool;
  for (int t = 0; t < 8; ++t) {
    pool.emplace_back([&, t] {
      for (int i = 0; i < 50; ++i) {
        Deposit d = f.deposit();
        d.relay_key = to_bytes("key-" + std::to_string(t) + "-" + std::to_string(i));
        tx.deposit(d, 0.0);
      }
    });
  }
  for (auto& th : pool) th.join();
  EXPECT_EQ(tx.live_count(0.0), 400u);
}
