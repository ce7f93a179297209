#pragma once

#include <cmath>
#include <map>
#include <string>
#include <string_view>

#include <json.hpp>

#include "nsvtp/error.hpp"

namespace nsvtp::codec {

// Parameter -> value pairs carried in a status segment. The wire form is
// compact JSON with keys in byte order, so equal records give equal bytes.
class StatusRecord {
 public:
  StatusRecord() = default;
  explicit StatusRecord(std::map<std::string, double> entries) {
    for (auto& [k, v] : entries) set(k, v);
  }

  void set(const std::string& name, double value) {
    if (name.empty()) fail(ErrorCode::InvalidCapsule, "status parameter with empty name");
    if (!std::isfinite(value)) {
      fail(ErrorCode::InvalidCapsule, "status value for '" + name + "' is not finite");
    }
    entries_[name] = value;
  }

  const std::map<std::string, double>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

  std::string to_canonical_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : entries_) j[k] = v;
    return j.dump();
  }

  static StatusRecord from_json(std::string_view text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      fail(ErrorCode::MalformedAppendix, "status payload is not a JSON object");
    }
    StatusRecord rec;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!it.value().is_number()) {
        fail(ErrorCode::MalformedAppendix,
             "status value for '" + it.key() + "' is not a number");
      }
      rec.set(it.key(), it.value().get<double>());
    }
    return rec;
  }

  bool operator==(const StatusRecord&) const = default;

 private:
  std::map<std::string, double> entries_;
};

}  // namespace nsvtp::codec
