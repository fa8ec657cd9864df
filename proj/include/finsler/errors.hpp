#ifndef FINSLER_ERRORS_HPP
#define FINSLER_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace finsler {

enum class ErrorCode {
  NoConvergence,
  ZeroVector,
  NotOnIndicatrix,
  NotOnFiguratrix,
  FieldTooStrong,
  CoincidentPoints,
  ChordTooLongForField,
  SingularMass,
  GrazingDeparture,
  NoExit,
  GrazingRay,
  InvalidParameters,
  AmbiguousCanonicalization,
  ZeroWinding,
  Unsupported,
  InvalidConfig,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::NotOnIndicatrix: return "NotOnIndicatrix";
    case ErrorCode::NotOnFiguratrix: return "NotOnFiguratrix";
    case ErrorCode::FieldTooStrong: return "FieldTooStrong";
    case ErrorCode::CoincidentPoints: return "CoincidentPoints";
    case ErrorCode::ChordTooLongForField: return "ChordTooLongForField";
    case ErrorCode::SingularMass: return "SingularMass";
    case ErrorCode::GrazingDeparture: return "GrazingDeparture";
    case ErrorCode::NoExit: return "NoExit";
    case ErrorCode::GrazingRay: return "GrazingRay";
    case ErrorCode::InvalidParameters: return "InvalidParameters";
    case ErrorCode::AmbiguousCanonicalization: return "AmbiguousCanonicalization";
    case ErrorCode::ZeroWinding: return "ZeroWinding";
    case ErrorCode::Unsupported: return "Unsupported";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace finsler

#endif
