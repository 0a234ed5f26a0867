#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace slpstack {

enum class ErrorCode {
  InvalidArgument,
  DuplicateAddress,
  PathMismatch,
  NonDiscreteBranch,
  UnannotatedBranchSuspected,
  PathUnrealizable,
  InitFailure,
  NonPositiveVariance,
  InconsistentReturnLength,
  Infeasible,
  ZeroMassSlp,
  TooFewTailSamples,
  MissingLikelihoodTerms,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DuplicateAddress: return "DuplicateAddress";
    case ErrorCode::PathMismatch: return "PathMismatch";
    case ErrorCode::NonDiscreteBranch: return "NonDiscreteBranch";
    case ErrorCode::UnannotatedBranchSuspected: return "UnannotatedBranchSuspected";
    case ErrorCode::PathUnrealizable: return "PathUnrealizable";
    case ErrorCode::InitFailure: return "InitFailure";
    case ErrorCode::NonPositiveVariance: return "NonPositiveVariance";
    case ErrorCode::InconsistentReturnLength: return "InconsistentReturnLength";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::ZeroMassSlp: return "ZeroMassSlp";
    case ErrorCode::TooFewTailSamples: return "TooFewTailSamples";
    case ErrorCode::MissingLikelihoodTerms: return "MissingLikelihoodTerms";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// All library failures are reported through this exception; `code()` lets
/// callers branch on the failure kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace slpstack
