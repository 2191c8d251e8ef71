#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tamatch {

// Absolute tolerance for the "entries sum to 1" invariant on construction.
inline constexpr double kSimplexSumTol = 1e-9;

// Floor used inside log arguments when an entry is positive but subnormal.
// True zeros keep the 0*ln(0) = 0 convention.
inline constexpr double kLogFloor = 1e-12;

// A C-dimensional probability distribution over classes. Entries are >= 0
// and sum to 1 within kSimplexSumTol; inputs further off are rejected rather
// than silently renormalized. All reductions over entries run left to right
// in class order so results are reproducible.
class SimplexVector {
 public:
  static SimplexVector from_probs(std::vector<double> probs);
  static SimplexVector uniform(std::size_t classes);

  std::size_t dim() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  const std::vector<double>& probs() const { return probs_; }

  friend bool operator==(const SimplexVector&, const SimplexVector&) = default;

 private:
  explicit SimplexVector(std::vector<double> probs) : probs_(std::move(probs)) {}
  std::vector<double> probs_;
};

// A vector of strictly positive finite ratios (per-class scaling factors,
// pre-clip weights).
class PositiveVector {
 public:
  static PositiveVector from_values(std::vector<double> values);

  std::size_t dim() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }

 private:
  explicit PositiveVector(std::vector<double> values)
      : values_(std::move(values)) {}
  std::vector<double> values_;
};

// v[i] / sum(v). Inputs already summing to 1 within kSimplexSumTol pass
// through unchanged, which makes normalize bitwise idempotent.
SimplexVector normalize(std::span<const double> v);

// KL(p || q) in nats, left-to-right sum of p[i]*ln(p[i]/q[i]).
double kl_divergence(const SimplexVector& p, const SimplexVector& q);

// Shannon entropy in nats, in [0, ln C].
double entropy(const SimplexVector& p);

// lambda*prev + (1-lambda)*obs.
SimplexVector ema_update(const SimplexVector& prev, const SimplexVector& obs,
                         double lambda);

// Index of the maximum entry; exact ties resolve to the lowest index.
std::size_t argmax_deterministic(std::span<const double> v);

// -ln(p) with the same subnormal floor as entropy/kl_divergence; an exact
// zero yields +inf.
double negative_log_prob(double p);

}  // namespace tamatch
