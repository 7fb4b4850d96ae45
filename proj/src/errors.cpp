#include "quivernet/errors.hpp"

namespace quivernet {

const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::HasCycle: return "HasCycle";
    case ErrorCode::AdjacencyViolation: return "AdjacencyViolation";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::CenterOutsideChambers: return "CenterOutsideChambers";
    case ErrorCode::NonTransverseCut: return "NonTransverseCut";
    case ErrorCode::OriginNotInterior: return "OriginNotInterior";
    case ErrorCode::NotStable: return "NotStable";
    case ErrorCode::OutsideDomain: return "OutsideDomain";
    case ErrorCode::SingularGram: return "SingularGram";
    case ErrorCode::SingularFrame: return "SingularFrame";
    case ErrorCode::SingularGauge: return "SingularGauge";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::SingularMetric: return "SingularMetric";
    case ErrorCode::ChartExit: return "ChartExit";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::OnBoundary: return "OnBoundary";
    case ErrorCode::LiftFailure: return "LiftFailure";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::HasCycle:
    case ErrorCode::AdjacencyViolation:
    case ErrorCode::EmptyDataset:
    case ErrorCode::CenterOutsideChambers:
    case ErrorCode::NonTransverseCut:
    case ErrorCode::OriginNotInterior:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

}  // namespace quivernet
