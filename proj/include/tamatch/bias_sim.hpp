#pragma once

#include <cstdint>
#include <vector>

#include "tamatch/rng.hpp"

namespace tamatch {

// --------------------------------------------------------------------------
// Categorical self-training: a two-class distribution updates its own
// parameter from batches sampled from itself.
// --------------------------------------------------------------------------

struct CategoricalSimConfig {
  std::vector<double> p1_grid;       // initial class-1 probabilities
  std::int64_t samples_per_step = 4; // n
  std::int64_t steps = 1000;
  std::int64_t trajectories = 1000;
  double eta = 1.0;
  std::uint64_t seed = 0;

  // 20 evenly spaced initial probabilities from 0.05 to 0.95.
  static std::vector<double> default_grid();
};

struct TrajectoryResult {
  double theta_init = 0.0;
  double theta_final = 0.0;
  double kl_init = 0.0;   // KL(p(theta) || (0.5, 0.5)), nats
  double kl_final = 0.0;
  bool amplified = false; // kl_final > kl_init
};

struct AmplificationEstimate {
  double probability = 0.0;
  double std_error = 0.0;  // binomial standard error
};

// p1(theta) = 1 / (1 + e^theta); strictly decreasing.
double p1_of_theta(double theta);

// Inverse of p1_of_theta: theta = ln((1 - p1) / p1).
double theta_init_of_p1(double p1);

// Draw n samples from (p1(theta), p2(theta)), estimate the batch
// distribution, and take one gradient step:
// theta' = theta - eta * (p1_batch - p1(theta)).
double categorical_step(double theta, std::int64_t n, double eta,
                        SplitRng& rng);

// One full trajectory on its own RNG stream keyed by
// (seed, samples_per_step, grid_index, traj_index).
TrajectoryResult run_trajectory(const CategoricalSimConfig& cfg,
                                std::size_t grid_index,
                                std::int64_t traj_index);

// Fraction of trajectories whose KL to the uniform truth grew.
AmplificationEstimate amplification_probability(const CategoricalSimConfig& cfg,
                                                std::size_t grid_index);

// --------------------------------------------------------------------------
// 1-D logistic self-training: expected dynamics of the bias parameter b
// under thresholded pseudo-labeling, g(x; b) = 1 / (1 + e^-(x+b)).
// --------------------------------------------------------------------------

struct LogisticDensity {
  enum class Kind { kStandardNormal, kTwoComponentMixture };
  Kind kind = Kind::kStandardNormal;
  // Mixture parameters (equal weights, shared sigma); ignored for the
  // standard normal.
  double mu0 = -2.0;
  double mu1 = 2.0;
  double sigma = 1.0;

  double pdf(double x) const;
  double cdf(double x) const;
  // |x - mu| beyond which every component density is below 1e-14.
  double truncation_low() const;
  double truncation_high() const;
};

struct LogisticSimConfig {
  double tau = 0.95;    // in (0.5, 1)
  double b_init = 1.0;
  double eta = 0.5;
  std::int64_t steps = 200;
  double w0 = 1.0;      // class-0 weight
  double w1 = 1.0;      // class-1 weight
  LogisticDensity density;

  void validate() const;
};

// h = ln(tau / (1 - tau)); pseudo-label boundaries sit at x = -b -+ h.
double logistic_h(double tau);

enum class QSide { kQ0, kQ1 };

// Q0 = integral_{-inf}^{-b-h} p(x) g(x; b) dx
// Q1 = integral_{-b+h}^{+inf} p(x) (1 - g(x; b)) dx
// Adaptive quadrature, absolute tolerance 1e-10, integrand truncated where
// it falls below 1e-14.
double logistic_q(double b, double h, const LogisticDensity& density,
                  QSide side);

// b' = b - eta * (w0 * Q0(b) - w1 * Q1(b)).
double logistic_step(double b, const LogisticSimConfig& cfg);

// Same update with the integrals already in hand (callers that log Q0/Q1
// per step avoid integrating twice).
double logistic_step(double b, const LogisticSimConfig& cfg, double q0,
                     double q1);

// Mass of the pseudo-label regions: P(yhat=0) = P(x < -b-h),
// P(yhat=1) = P(x > -b+h).
double pseudo_label_mass(double b, double h, const LogisticDensity& density,
                         QSide side);

}  // namespace tamatch
