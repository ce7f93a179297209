#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace nsvtp::sim {

enum class Phase { Init, Run };

inline std::string_view phase_name(Phase p) { return p == Phase::Init ? "init" : "run"; }

// Event kinds written to the trace.
namespace kind {
inline constexpr std::string_view MainCall = "main_call";
inline constexpr std::string_view MainCallDone = "main_call_done";
inline constexpr std::string_view MainCallQueued = "main_call_queued";
inline constexpr std::string_view RelayHop = "relay_hop";
inline constexpr std::string_view Failure = "failure";
inline constexpr std::string_view Rotation = "rotation";
inline constexpr std::string_view Nsvtp = "nsvtp";
inline constexpr std::string_view NsvtpDropped = "nsvtp_dropped";
inline constexpr std::string_view TweakApplied = "tweak_applied";
inline constexpr std::string_view BlueprintReceived = "blueprint_received";
inline constexpr std::string_view FrequencyChangeStart = "freq_change_start";
inline constexpr std::string_view FrequencyChangeDone = "freq_change_done";
inline constexpr std::string_view PathwayEstablished = "pathway_established";
inline constexpr std::string_view PathwayClosed = "pathway_closed";
inline constexpr std::string_view RelayKeyReceived = "relay_key_received";
inline constexpr std::string_view TxDeposit = "tx.deposit";
inline constexpr std::string_view TxClaim = "tx.claim";
inline constexpr std::string_view TxRelease = "tx.release";
inline constexpr std::string_view TxNotifySouth = "tx.notify_south";
}  // namespace kind

// Address used for the exchange in from/to fields.
inline constexpr std::string_view kTxAddress = "tx";

struct TraceEvent {
  std::uint64_t seq = 0;
  double time = 0.0;
  std::string kind;
  std::string from;
  std::string to;
  Phase phase = Phase::Run;
  nlohmann::ordered_json detail = nlohmann::ordered_json::object();

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["seq"] = seq;
    j["t"] = time;
    j["kind"] = kind;
    j["from"] = from;
    j["to"] = to;
    j["phase"] = phase_name(phase);
    j["detail"] = detail;
    return j;
  }
};

class Trace {
 public:
  const TraceEvent& add(double t, std::string_view k, std::string from, std::string to, Phase phase,
                        nlohmann::ordered_json detail = nlohmann::ordered_json::object()) {
    events_.push_back({events_.size(), t, std::string(k), std::move(from), std::move(to), phase,
                       std::move(detail)});
    return events_.back();
  }

  const std::vector<TraceEvent>& events() const { return events_; }

  std::size_t count(std::string_view k) const {
    std::size_t n = 0;
    for (const auto& e : events_) n += e.kind == k;
    return n;
  }

  void write_jsonl(std::ostream& os) const {
    for (const auto& e : events_) os << e.to_json().dump() << '\n';
  }

  std::string to_jsonl() const {
    std::string out;
    for (const auto& e : events_) out += e.to_json().dump() + "\n";
    return out;
  }

 private:
  std::vector<TraceEvent> events_;
};

}  // namespace nsvtp::sim
