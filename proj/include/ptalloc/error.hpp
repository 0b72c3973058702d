#pragma once

#include <stdexcept>
#include <string>

namespace ptalloc {

enum class Errc {
  InvalidArgument,
  NonSymmetric,
  NegativeWeight,
  Disconnected,
  NegativeTime,
  ReversedInterval,
  NonPositiveScale,
  InfeasibleState,
  NegativeGap,
  NonPositiveEta,
  InfeasibleDemand,
  NonMonotoneGradient,
  GridTooCoarse,
  InvalidPrescribedTimes,
  NonFiniteState,
  InvariantViolation,
  ParseError,
  ValidationError,
};

inline const char* to_string(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::NonSymmetric: return "NonSymmetric";
    case Errc::NegativeWeight: return "NegativeWeight";
    case Errc::Disconnected: return "Disconnected";
    case Errc::NegativeTime: return "NegativeTime";
    case Errc::ReversedInterval: return "ReversedInterval";
    case Errc::NonPositiveScale: return "NonPositiveScale";
    case Errc::InfeasibleState: return "InfeasibleState";
    case Errc::NegativeGap: return "NegativeGap";
    case Errc::NonPositiveEta: return "NonPositiveEta";
    case Errc::InfeasibleDemand: return "InfeasibleDemand";
    case Errc::NonMonotoneGradient: return "NonMonotoneGradient";
    case Errc::GridTooCoarse: return "GridTooCoarse";
    case Errc::InvalidPrescribedTimes: return "InvalidPrescribedTimes";
    case Errc::NonFiniteState: return "NonFiniteState";
    case Errc::InvariantViolation: return "InvariantViolation";
    case Errc::ParseError: return "ParseError";
    case Errc::ValidationError: return "ValidationError";
  }
  return "Unknown";
}

// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ptalloc
