#include "tamatch/bias_sim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "tamatch/error.hpp"
#include "tamatch/simplex.hpp"

namespace tamatch {

namespace {

double kl_to_uniform2(double p1) {
  return kl_divergence(SimplexVector::from_probs({p1, 1.0 - p1}),
                       SimplexVector::uniform(2));
}

constexpr double kQuadAbsTol = 1e-10;
constexpr double kTruncationDensity = 1e-14;

double logistic_g(double x, double b) { return 1.0 / (1.0 + std::exp(-(x + b))); }

double normal_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) /
         (sigma * std::sqrt(2.0 * std::numbers::pi));
}

double normal_cdf(double x, double mu, double sigma) {
  return 0.5 * std::erfc(-(x - mu) / (sigma * std::numbers::sqrt2));
}

// Radius t with exp(-t^2/2)/(sigma*sqrt(2pi)) < 1e-14, plus margin.
double density_radius(double sigma) {
  const double peak = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
  return sigma * (std::sqrt(2.0 * std::log(peak / kTruncationDensity)) + 1.0);
}

}  // namespace

std::vector<double> CategoricalSimConfig::default_grid() {
  std::vector<double> grid(20);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid[i] = 0.05 + 0.9 * static_cast<double>(i) / 19.0;
  }
  return grid;
}

double p1_of_theta(double theta) { return 1.0 / (1.0 + std::exp(theta)); }

double theta_init_of_p1(double p1) {
  require(p1 > 0.0 && p1 < 1.0, ErrorCode::kProbabilityOutOfRange,
          "initial p1 must lie in (0, 1)");
  return std::log((1.0 - p1) / p1);
}

double categorical_step(double theta, std::int64_t n, double eta,
                        SplitRng& rng) {
  const double p1 = p1_of_theta(theta);
  std::int64_t count1 = 0;
  for (std::int64_t j = 0; j < n; ++j) {
    if (rng.next_bernoulli(p1)) ++count1;
  }
  const double p1_batch = static_cast<double>(count1) / static_cast<double>(n);
  return theta - eta * (p1_batch - p1);
}

TrajectoryResult run_trajectory(const CategoricalSimConfig& cfg,
                                std::size_t grid_index,
                                std::int64_t traj_index) {
  const double p1_init = cfg.p1_grid.at(grid_index);
  SplitRng rng(cfg.seed,
               {rng_tag::kBiasSim, static_cast<std::uint64_t>(cfg.samples_per_step),
                static_cast<std::uint64_t>(grid_index),
                static_cast<std::uint64_t>(traj_index)});

  TrajectoryResult result;
  result.theta_init = theta_init_of_p1(p1_init);
  result.kl_init = kl_to_uniform2(p1_init);

  double theta = result.theta_init;
  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    theta = categorical_step(theta, cfg.samples_per_step, cfg.eta, rng);
  }
  result.theta_final = theta;
  result.kl_final = kl_to_uniform2(p1_of_theta(theta));
  result.amplified = result.kl_final > result.kl_init;
  return result;
}

AmplificationEstimate amplification_probability(const CategoricalSimConfig& cfg,
                                                std::size_t grid_index) {
  require(cfg.trajectories >= 1, ErrorCode::kInvalidArgument,
          "need at least one trajectory");
  std::int64_t amplified = 0;
  for (std::int64_t t = 0; t < cfg.trajectories; ++t) {
    if (run_trajectory(cfg, grid_index, t).amplified) ++amplified;
  }
  const double n = static_cast<double>(cfg.trajectories);
  const double p = static_cast<double>(amplified) / n;
  return {p, std::sqrt(p * (1.0 - p) / n)};
}

// ---------------------------------------------------------------------------

double LogisticDensity::pdf(double x) const {
  if (kind == Kind::kStandardNormal) return normal_pdf(x, 0.0, 1.0);
  return 0.5 * normal_pdf(x, mu0, sigma) + 0.5 * normal_pdf(x, mu1, sigma);
}

double LogisticDensity::cdf(double x) const {
  if (kind == Kind::kStandardNormal) return normal_cdf(x, 0.0, 1.0);
  return 0.5 * normal_cdf(x, mu0, sigma) + 0.5 * normal_cdf(x, mu1, sigma);
}

double LogisticDensity::truncation_low() const {
  if (kind == Kind::kStandardNormal) return -density_radius(1.0);
  return std::min(mu0, mu1) - density_radius(sigma);
}

double LogisticDensity::truncation_high() const {
  if (kind == Kind::kStandardNormal) return density_radius(1.0);
  return std::max(mu0, mu1) + density_radius(sigma);
}

void LogisticSimConfig::validate() const {
  require(tau > 0.5 && tau < 1.0, ErrorCode::kThresholdOutOfRange,
          "tau must lie in (0.5, 1)");
  require(w0 >= 0.0 && w1 >= 0.0, ErrorCode::kInvalidArgument,
          "class weights must be >= 0");
  require(steps >= 0, ErrorCode::kInvalidArgument, "steps must be >= 0");
  require(density.sigma > 0.0, ErrorCode::kInvalidArgument,
          "density sigma must be > 0");
}

double logistic_h(double tau) {
  require(tau > 0.5 && tau < 1.0, ErrorCode::kThresholdOutOfRange,
          "tau must lie in (0.5, 1)");
  return std::log(tau / (1.0 - tau));
}

double logistic_q(double b, double h, const LogisticDensity& density,
                  QSide side) {
  // g and 1-g only flatten the integrand, so truncating where the density
  // itself is below 1e-14 truncates the integrand too.
  double lo, hi;
  std::function<double(double)> integrand;
  if (side == QSide::kQ0) {
    lo = density.truncation_low();
    hi = -b - h;
    integrand = [&](double x) { return density.pdf(x) * logistic_g(x, b); };
  } else {
    lo = -b + h;
    hi = density.truncation_high();
    integrand = [&](double x) {
      return density.pdf(x) * (1.0 - logistic_g(x, b));
    };
  }
  if (lo >= hi) return 0.0;  // region carries no mass above the cutoff

  double abs_err = 0.0;
  const double value =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
          integrand, lo, hi, 15, 1e-12, &abs_err);
  require(abs_err <= kQuadAbsTol, ErrorCode::kQuadratureNonConvergence,
          "quadrature error " + std::to_string(abs_err) + " above tolerance");
  return value;
}

double logistic_step(double b, const LogisticSimConfig& cfg) {
  cfg.validate();
  const double h = logistic_h(cfg.tau);
  const double q0 = logistic_q(b, h, cfg.density, QSide::kQ0);
  const double q1 = logistic_q(b, h, cfg.density, QSide::kQ1);
  return logistic_step(b, cfg, q0, q1);
}

double logistic_step(double b, const LogisticSimConfig& cfg, double q0,
                     double q1) {
  return b - cfg.eta * (cfg.w0 * q0 - cfg.w1 * q1);
}

double pseudo_label_mass(double b, double h, const LogisticDensity& density,
                         QSide side) {
  if (side == QSide::kQ0) return density.cdf(-b - h);
  return 1.0 - density.cdf(-b + h);
}

}  // namespace tamatch
