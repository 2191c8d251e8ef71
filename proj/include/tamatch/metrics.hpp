#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tamatch/debiaser.hpp"
#include "tamatch/simplex.hpp"

namespace tamatch {

// Fraction of the batch with a non-zero mask.
double utilization_ratio(const PseudoBatch& pb);

// acc[c] = correct-in-class-c / count-of-class-c. Classes absent from
// truths come back as nullopt, never as a silent 0.
std::vector<std::optional<double>> per_class_accuracy(
    std::span<const std::int32_t> preds, std::span<const std::int32_t> truths,
    std::size_t classes);

// 100 * (1 - accuracy).
double error_rate(std::span<const std::int32_t> preds,
                  std::span<const std::int32_t> truths);

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;       // sample std dev, n-1 denominator
  bool single_sample = false;  // std flagged as degenerate when n == 1
};

Aggregate seed_aggregate(std::span<const double> values);

// methods x tasks error-rate matrix, percentages in [0, 100].
struct ErrorTable {
  std::vector<std::string> methods;
  std::vector<std::string> tasks;
  std::vector<std::vector<double>> error;  // [method][task]

  void validate() const;
};

// Mean rank per method: within each task methods are ranked ascending by
// error (1 = best) with average ranks on ties, then averaged across tasks.
std::vector<double> friedman_rank(const ErrorTable& table);

// Delimited-text round trip: header row = task names, first column =
// method names.
ErrorTable load_error_table(const std::string& path);
std::string error_table_to_csv(const ErrorTable& table);

// KL(p_model || p_truth); argument order fixed by the reporting convention.
double kl_to_truth(const SimplexVector& p_model, const SimplexVector& p_truth);

}  // namespace tamatch
