#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pedpred {

enum class ErrorCode {
  // roadgraph
  kDuplicateId,
  kDanglingEndpoint,
  kNonPositiveReferenceSpeed,
  kDisconnectedGraph,
  kInvalidEdge,
  kOutOfRange,
  kUnknownNode,
  kUnknownEdge,
  kMalformedDocument,
  // lqr
  kNoConvergence,
  kNotStabilizable,
  kBadWeights,
  kSingularInnerMatrix,
  // predictor
  kBranchBudgetExceeded,
  kInvalidParams,
  // rl_baseline
  kGoalOffWalkable,
  kAllActionsBlocked,
  // evaluation
  kMalformedRow,
  kNonMonotoneTime,
  kTooShort,
  kNoValidWindows,
  kInsufficientSamples,
  // io
  kIo,
};

std::string_view to_string(ErrorCode code);

/// Exception type used across the library. `code()` identifies the failure
/// class so callers (and the CLI exit-code mapping) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace pedpred
