#include "pedpred/error.hpp"

namespace pedpred {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kDanglingEndpoint: return "DanglingEndpoint";
    case ErrorCode::kNonPositiveReferenceSpeed: return "NonPositiveReferenceSpeed";
    case ErrorCode::kDisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::kInvalidEdge: return "InvalidEdge";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kUnknownNode: return "UnknownNode";
    case ErrorCode::kUnknownEdge: return "UnknownEdge";
    case ErrorCode::kMalformedDocument: return "MalformedDocument";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kNotStabilizable: return "NotStabilizable";
    case ErrorCode::kBadWeights: return "BadWeights";
    case ErrorCode::kSingularInnerMatrix: return "SingularInnerMatrix";
    case ErrorCode::kBranchBudgetExceeded: return "BranchBudgetExceeded";
    case ErrorCode::kInvalidParams: return "InvalidParams";
    case ErrorCode::kGoalOffWalkable: return "GoalOffWalkable";
    case ErrorCode::kAllActionsBlocked: return "AllActionsBlocked";
    case ErrorCode::kMalformedRow: return "MalformedRow";
    case ErrorCode::kNonMonotoneTime: return "NonMonotoneTime";
    case ErrorCode::kTooShort: return "TooShort";
    case ErrorCode::kNoValidWindows: return "NoValidWindows";
    case ErrorCode::kInsufficientSamples: return "InsufficientSamples";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace pedpred
