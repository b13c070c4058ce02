#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cesplan {

enum class Errc {
  // netmodel
  CycleDetected,
  DisconnectedNode,
  NonPositiveImpedance,
  DimensionMismatch,
  // scenario
  ParseError,
  LengthMismatch,
  UnknownNode,
  NegativeLoadOrPv,
  OutOfRange,
  InvalidParameter,
  Io,
  // cesopt
  SlackLocation,
  InfeasibleBoxes,
  // planner
  NonReciprocal,
  DegenerateSpan,
  InvalidWeights,
  AllLocationsInfeasible,
};

std::string_view to_string(Errc code);

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace cesplan
