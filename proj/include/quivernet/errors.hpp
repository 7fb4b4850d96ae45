#pragma once

#include <stdexcept>
#include <string>

namespace quivernet {

enum class ErrorCode {
  // input problems (CLI exit 2)
  InvalidInput,
  ShapeMismatch,
  HasCycle,
  AdjacencyViolation,
  EmptyDataset,
  CenterOutsideChambers,
  NonTransverseCut,
  OriginNotInterior,
  // numerical failures (CLI exit 3)
  NotStable,
  OutsideDomain,
  SingularGram,
  SingularFrame,
  SingularGauge,
  NotPositiveDefinite,
  NonConvergence,
  SingularMetric,
  ChartExit,
  NonFinite,
  OnBoundary,
  LiftFailure,
};

const char* error_name(ErrorCode code);
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& detail);

}  // namespace quivernet
