#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tamatch/debiaser.hpp"
#include "tamatch/rng.hpp"
#include "tamatch/simplex.hpp"

namespace tamatch {

// Geometric long-tail: counts[i] = max(1, round(head * gamma^(-i/(C-1)))),
// round half up. gamma = 1 gives equal counts.
std::vector<std::int64_t> longtail_counts(std::int64_t head, double gamma,
                                          std::size_t classes);

// --------------------------------------------------------------------------
// Synthetic Gaussian-mixture datasets
// --------------------------------------------------------------------------

struct SynthDatasetSpec {
  std::size_t classes = 4;
  std::size_t dim = 2;
  // Row-major classes x dim. Empty selects the default layout: class means
  // evenly spaced on a ring of mean_radius in the first two coordinates
  // (a line segment when dim == 1).
  std::vector<double> means;
  double mean_radius = 2.0;
  std::vector<double> class_sigma;  // per-class isotropic std dev, size C
  std::int64_t labeled_head = 5;    // labeled count of class 0
  std::int64_t unlabeled_head = 300;
  double gamma = 1.0;               // head/tail imbalance ratio
  std::int64_t test_per_class = 250;
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<double> resolved_means() const;
};

struct SynthDataset {
  std::size_t classes = 0;
  std::size_t dim = 0;
  std::vector<double> labeled_x;  // row-major
  std::vector<std::int32_t> labeled_y;
  std::vector<double> unlabeled_x;
  // True labels of the unlabeled split, retained for evaluation only. The
  // training loop never sees them: it works on a TrainerData view that does
  // not carry this field.
  std::vector<std::int32_t> unlabeled_true_y;
  std::vector<double> test_x;
  std::vector<std::int32_t> test_y;
  // Empirical class marginal of labeled + unlabeled, matching realized
  // counts exactly.
  SimplexVector p_truth = SimplexVector::uniform(2);

  std::size_t labeled_count() const { return labeled_y.size(); }
  std::size_t unlabeled_count() const { return unlabeled_true_y.size(); }
  std::size_t test_count() const { return test_y.size(); }
};

SynthDataset generate_dataset(const SynthDatasetSpec& spec,
                              std::uint64_t master_seed);

// x + N(0, sigma^2 I). Always consumes dim normal draws, also for sigma = 0,
// so stream consumption does not depend on the noise scale.
void augment(std::span<const double> x, double sigma, SplitRng& rng,
             std::span<double> out);

// --------------------------------------------------------------------------
// Softmax classifier with analytic gradients
// --------------------------------------------------------------------------

enum class ModelKind { kLinear, kMlp };

struct ClassifierShape {
  ModelKind kind = ModelKind::kLinear;
  std::size_t classes = 2;
  std::size_t dim = 2;
  std::size_t hidden = 0;  // used by kMlp only

  std::size_t param_count() const;
};

// Flat parameter block. Layout: linear = [W (CxD), b (C)];
// mlp = [W1 (HxD), b1 (H), W2 (CxH), b2 (C)], all row-major.
struct ClassifierParams {
  ClassifierShape shape;
  std::vector<double> values;

  static ClassifierParams zeros(ClassifierShape shape);
  // Zero for linear; for the MLP, weights ~ N(0, 1/fan_in), biases zero.
  // Draw order: W1 row-major, then W2 row-major.
  static ClassifierParams init(ClassifierShape shape, SplitRng& rng);
};

// Softmax of the logits, computed with max-subtraction.
SimplexVector forward(const ClassifierParams& params,
                      std::span<const double> x);

struct StepOutput {
  double loss_l = 0.0;
  double loss_u = 0.0;
  std::vector<double> grads;  // same layout as ClassifierParams::values
  PseudoBatch pb;
  std::vector<SimplexVector> batch_p_w;  // raw weak-view predictions
};

// Combined labeled + unlabeled loss and analytic gradients. All feature
// spans are already augmented views; `state` carries this step's updated
// distributions. Pseudo labels, masks and weights are constants for the
// gradient (stop-gradient through the generation branch).
StepOutput loss_and_grad(const ClassifierParams& params,
                         std::span<const double> labeled_x,
                         std::span<const std::int32_t> labeled_y,
                         std::span<const double> unlabeled_weak_x,
                         std::span<const double> unlabeled_strong_x,
                         const DebiaserState& state);

// The same total loss as a pure function of params with a frozen pseudo
// batch; this is what the finite-difference gradient oracle drives.
double loss_given_pseudo_batch(const ClassifierParams& params,
                               std::span<const double> labeled_x,
                               std::span<const std::int32_t> labeled_y,
                               std::span<const double> unlabeled_strong_x,
                               const PseudoBatch& pb);

// lr0 * cos(7 pi k / (16 K)), with a linear ramp overlaid for k < warmup.
double lr_schedule(double lr0, std::int64_t k, std::int64_t total,
                   std::int64_t warmup = 0);

// --------------------------------------------------------------------------
// Training loop
// --------------------------------------------------------------------------

struct TrainConfig {
  ModelKind model = ModelKind::kLinear;
  std::size_t hidden = 16;
  std::int64_t steps = 3000;
  std::int64_t warmup = 0;
  double lr0 = 0.3;
  std::size_t batch_labeled = 64;
  std::size_t batch_unlabeled = 128;
  double sigma_weak = 0.045;
  double sigma_strong = 0.225;
  DebiaserConfig debiaser;
  std::int64_t eval_every = 50;

  void validate() const;
};

// What the gradient path is allowed to see: features and labeled labels.
// Borrows from the dataset, which must outlive the view.
struct TrainerData {
  std::size_t classes = 0;
  std::size_t dim = 0;
  std::span<const double> labeled_x;
  std::span<const std::int32_t> labeled_y;
  std::span<const double> unlabeled_x;

  std::size_t labeled_count() const { return labeled_y.size(); }
  std::size_t unlabeled_count() const {
    return dim == 0 ? 0 : unlabeled_x.size() / dim;
  }
  static TrainerData view(const SynthDataset& data);
};

// Evaluation-only view; read exclusively by the metrics emitter.
struct EvalContext {
  std::span<const double> test_x;
  std::span<const std::int32_t> test_y;
  SimplexVector p_truth = SimplexVector::uniform(2);

  static EvalContext view(const SynthDataset& data);
};

struct MetricsRow {
  std::int64_t step = 0;
  double lr = 0.0;
  double loss_l = 0.0;
  double loss_u = 0.0;
  double util_ratio = 0.0;
  double kl_model_truth = 0.0;
  double kl_target_truth = 0.0;
  double test_error = 0.0;               // percent
  std::vector<double> class_accuracy;    // NaN for classes absent from truth
};

struct MetricsHistory {
  std::vector<MetricsRow> rows;
  bool diverged = false;
};

struct TrainOutcome {
  MetricsHistory history;
  ClassifierParams params;
  DebiaserState state;
};

// K steps of: sample batches -> update_model_dist -> update_target_dist ->
// loss_and_grad -> SGD with the cosine schedule. Deterministic for a given
// (master_seed, run_seed); per-step RNG draw order is documented in the
// implementation and is part of the reproducibility contract.
TrainOutcome train(const TrainConfig& cfg, const TrainerData& data,
                   const EvalContext& eval, std::uint64_t master_seed,
                   std::uint64_t run_seed);

std::string metrics_to_csv(const MetricsHistory& history,
                           std::size_t classes);

}  // namespace tamatch
