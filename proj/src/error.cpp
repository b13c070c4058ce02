#include "cesplan/error.hpp"

namespace cesplan {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::CycleDetected: return "CycleDetected";
    case Errc::DisconnectedNode: return "DisconnectedNode";
    case Errc::NonPositiveImpedance: return "NonPositiveImpedance";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::ParseError: return "ParseError";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::UnknownNode: return "UnknownNode";
    case Errc::NegativeLoadOrPv: return "NegativeLoadOrPv";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::InvalidParameter: return "InvalidParameter";
    case Errc::Io: return "Io";
    case Errc::SlackLocation: return "SlackLocation";
    case Errc::InfeasibleBoxes: return "InfeasibleBoxes";
    case Errc::NonReciprocal: return "NonReciprocal";
    case Errc::DegenerateSpan: return "DegenerateSpan";
    case Errc::InvalidWeights: return "InvalidWeights";
    case Errc::AllLocationsInfeasible: return "AllLocationsInfeasible";
  }
  return "Unknown";
}

}  // namespace cesplan
