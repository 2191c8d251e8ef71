#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tamatch/simplex.hpp"

namespace tamatch {

// Lower end of the clipping interval for instance weights. kPaperOne keeps
// the printed [1, r_max]; kSymmetricReciprocal uses [1/r_max, r_max], which
// actually down-weights strong classes.
enum class WeightLowerMode { kPaperOne, kSymmetricReciprocal };

struct DebiaserConfig {
  std::size_t classes = 10;
  double tau = 0.95;            // confidence threshold, strict >
  double lambda_model = 0.999;  // EMA momentum for the model distribution
  double lambda_target = 1.0;   // EMA momentum for the target distribution
  bool enable_rescale = true;
  bool enable_reweight = true;
  bool enable_clipping = true;
  bool enable_target_update = true;
  WeightLowerMode weight_lower_mode = WeightLowerMode::kPaperOne;

  void validate() const;

  // All four toggles off: the fixed-threshold baseline.
  DebiaserConfig baseline() const;
};

// Per-run mutable state. Cheap to copy so independent runs can fork it.
// Single writer: one trainer thread mutates per step; the read-only
// operations below may run concurrently against a frozen copy.
struct DebiaserState {
  SimplexVector p_model;
  SimplexVector p_target;
  std::int64_t step = 0;
  DebiaserConfig config;

  // Both distributions start uniform at step 0.
  static DebiaserState initial(DebiaserConfig cfg);
};

// Pseudo-label, mask and instance weight for one unlabeled batch.
struct PseudoBatch {
  std::vector<std::int32_t> labels;
  std::vector<std::uint8_t> masks;  // 0 or 1
  std::vector<double> weights;

  std::size_t batch_size() const { return labels.size(); }
};

// r[c] = p_target[c] / p_model[c].
PositiveVector scaling_factor(const DebiaserState& state);

// normalize(p_w * r). A point mass is a fixed point; all-ones r is identity.
SimplexVector rescale(const SimplexVector& p_w, const PositiveVector& r);

// Hyper-parameter-free clipping interval [r_min, r_max] with
// r_max = 1 + KL(p_model || p_target) / (H(p_model) / C).
std::pair<double, double> adaptive_bound(const DebiaserState& state);

// Rescale -> threshold -> label -> weight for one batch of weak-view
// predictions. Pure read of state.
PseudoBatch generate(const DebiaserState& state,
                     std::span<const SimplexVector> batch_p_w);

// EMA of p_model over the mean of the raw (pre-rescale) weak predictions.
// Does not touch the step counter; stepping belongs to the trainer.
DebiaserState update_model_dist(DebiaserState state,
                                std::span<const SimplexVector> batch_p_w);

// p_target <- lambda_target * p_target + (1 - lambda_target) * p_model,
// using the already-updated p_model of this step. No-op when disabled.
DebiaserState update_target_dist(DebiaserState state);

// (1/|B|) * sum_i w_i * m_i * (-ln p_s[i][label_i]); divides by the full
// batch size, not the masked count.
double weighted_masked_ce(std::span<const SimplexVector> p_s,
                          const PseudoBatch& pb);

// Snapshot for checkpoint/resume and the metrics emitter.
std::string state_to_json(const DebiaserState& state);
DebiaserState state_from_json(const std::string& text);

}  // namespace tamatch
