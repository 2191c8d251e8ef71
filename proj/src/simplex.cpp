#include "tamatch/simplex.hpp"

#include <cmath>
#include <limits>

#include "tamatch/error.hpp"

namespace tamatch {

namespace {

double sum_left_to_right(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

// Log argument with the subnormal floor; callers have excluded exact zeros.
double floored(double x) {
  return (x > 0.0 && x < std::numeric_limits<double>::min()) ? kLogFloor : x;
}

void check_nonnegative_finite(std::span<const double> v) {
  for (double x : v) {
    require(std::isfinite(x), ErrorCode::kInvalidArgument,
            "non-finite entry in probability vector");
    require(x >= 0.0, ErrorCode::kNegativeEntry,
            "negative entry in probability vector");
  }
}

}  // namespace

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kAllZeroVector: return "AllZeroVector";
    case ErrorCode::kNegativeEntry: return "NegativeEntry";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kUnsupportedSupport: return "UnsupportedSupport";
    case ErrorCode::kLambdaOutOfRange: return "LambdaOutOfRange";
    case ErrorCode::kInvalidClassCount: return "InvalidClassCount";
    case ErrorCode::kEmptyVector: return "EmptyVector";
    case ErrorCode::kSimplexViolation: return "SimplexViolation";
    case ErrorCode::kPositivityViolation: return "PositivityViolation";
    case ErrorCode::kDegenerateModelDistribution:
      return "DegenerateModelDistribution";
    case ErrorCode::kDegenerateEntropy: return "DegenerateEntropy";
    case ErrorCode::kEmptyBatch: return "EmptyBatch";
    case ErrorCode::kProbabilityOutOfRange: return "ProbabilityOutOfRange";
    case ErrorCode::kThresholdOutOfRange: return "ThresholdOutOfRange";
    case ErrorCode::kQuadratureNonConvergence:
      return "QuadratureNonConvergence";
    case ErrorCode::kInvalidGamma: return "InvalidGamma";
    case ErrorCode::kDegenerateSpec: return "DegenerateSpec";
    case ErrorCode::kNonFiniteLogit: return "NonFiniteLogit";
    case ErrorCode::kDivergedTraining: return "DivergedTraining";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kMalformedTable: return "MalformedTable";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "UnknownError";
}

SimplexVector SimplexVector::from_probs(std::vector<double> probs) {
  require(probs.size() >= 2, ErrorCode::kInvalidClassCount,
          "a distribution needs at least 2 classes");
  check_nonnegative_finite(probs);
  const double s = sum_left_to_right(probs);
  require(std::abs(s - 1.0) <= kSimplexSumTol, ErrorCode::kSimplexViolation,
          "entries sum to " + std::to_string(s) + ", expected 1");
  return SimplexVector(std::move(probs));
}

SimplexVector SimplexVector::uniform(std::size_t classes) {
  require(classes >= 2, ErrorCode::kInvalidClassCount,
          "uniform distribution needs C >= 2");
  return SimplexVector(
      std::vector<double>(classes, 1.0 / static_cast<double>(classes)));
}

PositiveVector PositiveVector::from_values(std::vector<double> values) {
  require(!values.empty(), ErrorCode::kEmptyVector, "empty positive vector");
  for (double x : values) {
    require(std::isfinite(x) && x > 0.0, ErrorCode::kPositivityViolation,
            "entries must be finite and > 0");
  }
  return PositiveVector(std::move(values));
}

SimplexVector normalize(std::span<const double> v) {
  require(v.size() >= 2, ErrorCode::kInvalidClassCount,
          "normalize needs at least 2 entries");
  check_nonnegative_finite(v);
  const double s = sum_left_to_right(v);
  require(s > 0.0, ErrorCode::kAllZeroVector, "cannot normalize zero mass");
  std::vector<double> out(v.begin(), v.end());
  if (std::abs(s - 1.0) <= kSimplexSumTol) {
    // Already normalized within the construction tolerance: exact no-op.
    // This is what makes normalize(normalize(v)) bitwise equal.
    return SimplexVector::from_probs(std::move(out));
  }
  for (double& x : out) x /= s;
  return SimplexVector::from_probs(std::move(out));
}

double kl_divergence(const SimplexVector& p, const SimplexVector& q) {
  require(p.dim() == q.dim(), ErrorCode::kDimensionMismatch,
          "kl_divergence operands differ in dimension");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    if (p[i] == 0.0) continue;  // 0 * ln(0/q) = 0
    require(q[i] > 0.0, ErrorCode::kUnsupportedSupport,
            "q has zero mass where p does not");
    sum += p[i] * std::log(floored(p[i]) / floored(q[i]));
  }
  // Gibbs' inequality: true value >= 0, so tiny negatives are rounding.
  if (sum < 0.0 && sum > -1e-12) sum = 0.0;
  return sum;
}

double entropy(const SimplexVector& p) {
  double sum = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    if (p[i] == 0.0) continue;
    sum += p[i] * std::log(floored(p[i]));
  }
  return -sum;
}

SimplexVector ema_update(const SimplexVector& prev, const SimplexVector& obs,
                         double lambda) {
  require(prev.dim() == obs.dim(), ErrorCode::kDimensionMismatch,
          "ema_update operands differ in dimension");
  require(lambda >= 0.0 && lambda <= 1.0, ErrorCode::kLambdaOutOfRange,
          "EMA momentum must lie in [0, 1]");
  std::vector<double> out(prev.dim());
  for (std::size_t i = 0; i < prev.dim(); ++i) {
    out[i] = lambda * prev[i] + (1.0 - lambda) * obs[i];
  }
  return SimplexVector::from_probs(std::move(out));
}

std::size_t argmax_deterministic(std::span<const double> v) {
  require(!v.empty(), ErrorCode::kEmptyVector, "argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;  // strict: ties keep the lowest index
  }
  return best;
}

double negative_log_prob(double p) {
  if (p == 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(floored(p));
}

}  // namespace tamatch
