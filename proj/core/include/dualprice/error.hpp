#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dualprice {

enum class ErrorCode {
  ParseError,
  InvalidTree,
  ZeroMass,
  Domain,
  AssumptionFail,
  NoMartingaleMeasure,
  CapExceeded,
  NonConverged,
  InfeasibleEntropy,
  NoPrimalOptimizer,
  ReplicationGap,
  NotExponential,
  BracketFail,
  AugmentInfeasible,
  Dimension,
  GapDetected,
  Infinite,
  InvalidArgument,
};

/// Stable upper-case tag for an error code, e.g. "NO_MM".
std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dualprice
