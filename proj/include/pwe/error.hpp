#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pwe {

enum class ErrorCode {
  InvalidVector,
  OutOfRoom,
  DegenerateGeometry,
  OutOfCoverage,
  DegenerateDiagram,
  DiagramTooNarrowlySampled,
  InvalidAngle,
  EmptyCodebook,
  InsufficientAnchors,
  NonConvergence,
  InsufficientPds,
  DegeneratePdGeometry,
  InvalidMeasurement,
  ScanFailed,
  LocalizationUnavailable,
  ConfigError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidVector: return "invalid_vector";
    case ErrorCode::OutOfRoom: return "out_of_room";
    case ErrorCode::DegenerateGeometry: return "degenerate_geometry";
    case ErrorCode::OutOfCoverage: return "out_of_coverage";
    case ErrorCode::DegenerateDiagram: return "degenerate_diagram";
    case ErrorCode::DiagramTooNarrowlySampled: return "diagram_too_narrowly_sampled";
    case ErrorCode::InvalidAngle: return "invalid_angle";
    case ErrorCode::EmptyCodebook: return "empty_codebook";
    case ErrorCode::InsufficientAnchors: return "insufficient_anchors";
    case ErrorCode::NonConvergence: return "non_convergence";
    case ErrorCode::InsufficientPds: return "insufficient_pds";
    case ErrorCode::DegeneratePdGeometry: return "degenerate_pd_geometry";
    case ErrorCode::InvalidMeasurement: return "invalid_measurement";
    case ErrorCode::ScanFailed: return "scan_failed";
    case ErrorCode::LocalizationUnavailable: return "localization_unavailable";
    case ErrorCode::ConfigError: return "config_error";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pwe
