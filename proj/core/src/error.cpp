#include "dualprice/error.hpp"

namespace dualprice {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "PARSE_ERROR";
    case ErrorCode::InvalidTree: return "INVALID_TREE";
    case ErrorCode::ZeroMass: return "ZERO_MASS";
    case ErrorCode::Domain: return "DOMAIN";
    case ErrorCode::AssumptionFail: return "ASSUMPTION_FAIL";
    case ErrorCode::NoMartingaleMeasure: return "NO_MM";
    case ErrorCode::CapExceeded: return "CAP_EXCEEDED";
    case ErrorCode::NonConverged: return "NONCONVERGED";
    case ErrorCode::InfeasibleEntropy: return "INFEASIBLE_ENTROPY";
    case ErrorCode::NoPrimalOptimizer: return "NO_PRIMAL_OPTIMIZER";
    case ErrorCode::ReplicationGap: return "REPLICATION_GAP";
    case ErrorCode::NotExponential: return "NOT_EXPONENTIAL";
    case ErrorCode::BracketFail: return "BRACKETFAIL";
    case ErrorCode::AugmentInfeasible: return "AUGMENT_INFEASIBLE";
    case ErrorCode::Dimension: return "DIMENSION";
    case ErrorCode::GapDetected: return "GAP_DETECTED";
    case ErrorCode::Infinite: return "INFINITE";
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
  }
  return "UNKNOWN";
}

}  // namespace dualprice
