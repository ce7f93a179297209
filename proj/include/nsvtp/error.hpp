#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nsvtp {

// Every failure surfaced by the library carries one of these codes. The CLI
// renders the code name verbatim, so names are part of the user contract.
enum class ErrorCode {
  // capsule-codec
  InvalidResourceId,
  IdContainsDelimiter,
  SegmentTooLarge,
  EmptySegment,
  InvalidCapsule,
  MalformedAppendix,
  ElisionWithoutContext,
  UnknownVersion,
  LengthOverflow,
  TruncatedStream,
  UnknownTlvType,
  TransformMismatch,
  CorruptPayload,
  // scheme-lang
  SyntaxError,
  DuplicateName,
  UnknownIdentifier,
  InvalidFeasibleSet,
  UnboundParam,
  OutOfFeasibleSet,
  DivisionByZero,
  NumericDomain,
  GuardFailed,
  NoRegimeMatches,
  AmbiguousRegime,
  UnknownScheme,
  UnknownFormula,
  MissingBinding,
  // dvfs-model
  InvalidModelParams,
  InvalidCyclePattern,
  FrequencyOutOfRange,
  LoadOutOfRange,
  InfeasibleTweakWindow,
  // tx
  DuplicateRelayKey,
  UnknownRelayKey,
  LayerMismatch,
  Expired,
  AlreadyClaimed,
  IncompleteClaim,
  // stack-sim
  UnknownComponent,
  AdjacencyViolation,
  GradeInvariant,
  NoPath,
  DeadComponent,
  AlreadyDead,
  ComponentAlive,
  PoolExhausted,
  PathwayNotEstablished,
  TweakRejected,
  // cli
  ConfigError,
};

constexpr std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidResourceId: return "InvalidResourceId";
    case ErrorCode::IdContainsDelimiter: return "IdContainsDelimiter";
    case ErrorCode::SegmentTooLarge: return "SegmentTooLarge";
    case ErrorCode::EmptySegment: return "EmptySegment";
    case ErrorCode::InvalidCapsule: return "InvalidCapsule";
    case ErrorCode::MalformedAppendix: return "MalformedAppendix";
    case ErrorCode::ElisionWithoutContext: return "ElisionWithoutContext";
    case ErrorCode::UnknownVersion: return "UnknownVersion";
    case ErrorCode::LengthOverflow: return "LengthOverflow";
    case ErrorCode::TruncatedStream: return "TruncatedStream";
    case ErrorCode::UnknownTlvType: return "UnknownTlvType";
    case ErrorCode::TransformMismatch: return "TransformMismatch";
    case ErrorCode::CorruptPayload: return "CorruptPayload";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::UnknownIdentifier: return "UnknownIdentifier";
    case ErrorCode::InvalidFeasibleSet: return "InvalidFeasibleSet";
    case ErrorCode::UnboundParam: return "UnboundParam";
    case ErrorCode::OutOfFeasibleSet: return "OutOfFeasibleSet";
    case ErrorCode::DivisionByZero: return "DivisionByZero";
    case ErrorCode::NumericDomain: return "NumericDomain";
    case ErrorCode::GuardFailed: return "GuardFailed";
    case ErrorCode::NoRegimeMatches: return "NoRegimeMatches";
    case ErrorCode::AmbiguousRegime: return "AmbiguousRegime";
    case ErrorCode::UnknownScheme: return "UnknownScheme";
    case ErrorCode::UnknownFormula: return "UnknownFormula";
    case ErrorCode::MissingBinding: return "MissingBinding";
    case ErrorCode::InvalidModelParams: return "InvalidModelParams";
    case ErrorCode::InvalidCyclePattern: return "InvalidCyclePattern";
    case ErrorCode::FrequencyOutOfRange: return "FrequencyOutOfRange";
    case ErrorCode::LoadOutOfRange: return "LoadOutOfRange";
    case ErrorCode::InfeasibleTweakWindow: return "InfeasibleTweakWindow";
    case ErrorCode::DuplicateRelayKey: return "DuplicateRelayKey";
    case ErrorCode::UnknownRelayKey: return "UnknownRelayKey";
    case ErrorCode::LayerMismatch: return "LayerMismatch";
    case ErrorCode::Expired: return "Expired";
    case ErrorCode::AlreadyClaimed: return "AlreadyClaimed";
    case ErrorCode::IncompleteClaim: return "IncompleteClaim";
    case ErrorCode::UnknownComponent: return "UnknownComponent";
    case ErrorCode::AdjacencyViolation: return "AdjacencyViolation";
    case ErrorCode::GradeInvariant: return "GradeInvariant";
    case ErrorCode::NoPath: return "NoPath";
    case ErrorCode::DeadComponent: return "DeadComponent";
    case ErrorCode::AlreadyDead: return "AlreadyDead";
    case ErrorCode::ComponentAlive: return "ComponentAlive";
    case ErrorCode::PoolExhausted: return "PoolExhausted";
    case ErrorCode::PathwayNotEstablished: return "PathwayNotEstablished";
    case ErrorCode::TweakRejected: return "TweakRejected";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view name() const noexcept { return error_name(code_); }

  // "Name: message", the form printed by the CLI.
  std::string render() const { return std::string(name()) + ": " + what(); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace nsvtp
