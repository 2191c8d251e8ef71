#pragma once

#include <stdexcept>
#include <string>

namespace tamatch {

// Every failure mode in the library carries one of these codes. The C API
// maps them onto tamatch_status values; C++ callers can switch on code().
enum class ErrorCode {
  kInvalidArgument,
  // simplex
  kAllZeroVector,
  kNegativeEntry,
  kDimensionMismatch,
  kUnsupportedSupport,
  kLambdaOutOfRange,
  kInvalidClassCount,
  kEmptyVector,
  kSimplexViolation,
  kPositivityViolation,
  // debiaser
  kDegenerateModelDistribution,
  kDegenerateEntropy,
  kEmptyBatch,
  // bias_sim
  kProbabilityOutOfRange,
  kThresholdOutOfRange,
  kQuadratureNonConvergence,
  // synth_ssl
  kInvalidGamma,
  kDegenerateSpec,
  kNonFiniteLogit,
  kDivergedTraining,
  // metrics
  kLabelOutOfRange,
  kEmptyInput,
  kMalformedTable,
  // config / io
  kConfigError,
  kIoError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace tamatch
