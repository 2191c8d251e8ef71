#include "tamatch/synth_ssl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "tamatch/error.hpp"
#include "tamatch/format.hpp"
#include "tamatch/metrics.hpp"

namespace tamatch {

namespace {

// Forward pass scratch: logits/hidden reused across a batch.
struct ForwardScratch {
  std::vector<double> hidden;
  std::vector<double> probs;
};

void softmax_into(std::span<double> logits) {
  for (double z : logits) {
    require(std::isfinite(z), ErrorCode::kNonFiniteLogit,
            "non-finite logit in forward pass");
  }
  double m = logits[0];
  for (double z : logits) m = std::max(m, z);
  double sum = 0.0;
  for (double& z : logits) {
    z = std::exp(z - m);
    sum += z;
  }
  for (double& z : logits) z /= sum;
}

// probs (and hidden activations for the MLP) for one input row.
void forward_into(const ClassifierParams& params, std::span<const double> x,
                  ForwardScratch& s) {
  const auto& sh = params.shape;
  s.probs.assign(sh.classes, 0.0);
  const double* v = params.values.data();
  if (sh.kind == ModelKind::kLinear) {
    // [W (CxD), b (C)]
    const double* w = v;
    const double* b = v + sh.classes * sh.dim;
    for (std::size_t c = 0; c < sh.classes; ++c) {
      double z = b[c];
      for (std::size_t j = 0; j < sh.dim; ++j) z += w[c * sh.dim + j] * x[j];
      s.probs[c] = z;
    }
  } else {
    // [W1 (HxD), b1 (H), W2 (CxH), b2 (C)]
    const double* w1 = v;
    const double* b1 = v + sh.hidden * sh.dim;
    const double* w2 = b1 + sh.hidden;
    const double* b2 = w2 + sh.classes * sh.hidden;
    s.hidden.assign(sh.hidden, 0.0);
    for (std::size_t j = 0; j < sh.hidden; ++j) {
      double a = b1[j];
      for (std::size_t i = 0; i < sh.dim; ++i) a += w1[j * sh.dim + i] * x[i];
      s.hidden[j] = std::tanh(a);
    }
    for (std::size_t c = 0; c < sh.classes; ++c) {
      double z = b2[c];
      for (std::size_t j = 0; j < sh.hidden; ++j) {
        z += w2[c * sh.hidden + j] * s.hidden[j];
      }
      s.probs[c] = z;
    }
  }
  softmax_into(s.probs);
}

// Accumulate coeff * d(-ln p[target])/d(params) given the forward pass.
void accumulate_grad(const ClassifierParams& params, std::span<const double> x,
                     const ForwardScratch& s, std::size_t target, double coeff,
                     std::span<double> grads) {
  const auto& sh = params.shape;
  if (sh.kind == ModelKind::kLinear) {
    double* gw = grads.data();
    double* gb = grads.data() + sh.classes * sh.dim;
    for (std::size_t c = 0; c < sh.classes; ++c) {
      const double dz = coeff * (s.probs[c] - (c == target ? 1.0 : 0.0));
      for (std::size_t j = 0; j < sh.dim; ++j) gw[c * sh.dim + j] += dz * x[j];
      gb[c] += dz;
    }
  } else {
    const double* w2 = params.values.data() + sh.hidden * sh.dim + sh.hidden;
    double* gw1 = grads.data();
    double* gb1 = grads.data() + sh.hidden * sh.dim;
    double* gw2 = gb1 + sh.hidden;
    double* gb2 = gw2 + sh.classes * sh.hidden;
    std::vector<double> dh(sh.hidden, 0.0);
    for (std::size_t c = 0; c < sh.classes; ++c) {
      const double dz = coeff * (s.probs[c] - (c == target ? 1.0 : 0.0));
      for (std::size_t j = 0; j < sh.hidden; ++j) {
        gw2[c * sh.hidden + j] += dz * s.hidden[j];
        dh[j] += w2[c * sh.hidden + j] * dz;
      }
      gb2[c] += dz;
    }
    for (std::size_t j = 0; j < sh.hidden; ++j) {
      const double da = dh[j] * (1.0 - s.hidden[j] * s.hidden[j]);
      for (std::size_t i = 0; i < sh.dim; ++i) gw1[j * sh.dim + i] += da * x[i];
      gb1[j] += da;
    }
  }
}

std::span<const double> row_span(std::span<const double> xs, std::size_t i,
                                 std::size_t dim) {
  return xs.subspan(i * dim, dim);
}

}  // namespace

std::vector<std::int64_t> longtail_counts(std::int64_t head, double gamma,
                                          std::size_t classes) {
  require(head >= 1, ErrorCode::kInvalidArgument, "head count must be >= 1");
  require(classes >= 2, ErrorCode::kInvalidClassCount, "need C >= 2");
  require(gamma >= 1.0, ErrorCode::kInvalidGamma,
          "imbalance ratio must be >= 1");
  std::vector<std::int64_t> counts(classes);
  for (std::size_t i = 0; i < classes; ++i) {
    const double exact =
        static_cast<double>(head) *
        std::pow(gamma, -static_cast<double>(i) /
                            static_cast<double>(classes - 1));
    // round half up, floor at 1
    counts[i] = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(std::floor(exact + 0.5)));
  }
  return counts;
}

void SynthDatasetSpec::validate() const {
  require(classes >= 2, ErrorCode::kInvalidClassCount, "need C >= 2");
  require(dim >= 1, ErrorCode::kDegenerateSpec, "need dim >= 1");
  require(labeled_head >= 1 && unlabeled_head >= 1 && test_per_class >= 1,
          ErrorCode::kDegenerateSpec, "split head counts must be >= 1");
  require(gamma >= 1.0, ErrorCode::kInvalidGamma,
          "imbalance ratio must be >= 1");
  require(class_sigma.size() == classes, ErrorCode::kDegenerateSpec,
          "class_sigma must have one entry per class");
  for (double s : class_sigma) {
    require(std::isfinite(s) && s >= 0.0, ErrorCode::kDegenerateSpec,
            "class sigma must be finite and >= 0");
  }
  if (!means.empty()) {
    require(means.size() == classes * dim, ErrorCode::kDegenerateSpec,
            "means must be a classes x dim matrix");
  }
  const auto m = resolved_means();
  for (std::size_t a = 0; a < classes; ++a) {
    for (std::size_t b = a + 1; b < classes; ++b) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double diff = m[a * dim + j] - m[b * dim + j];
        d2 += diff * diff;
      }
      require(d2 > 0.0, ErrorCode::kDegenerateSpec,
              "class means must be pairwise distinct");
    }
  }
}

std::vector<double> SynthDatasetSpec::resolved_means() const {
  if (!means.empty()) return means;
  std::vector<double> m(classes * dim, 0.0);
  for (std::size_t c = 0; c < classes; ++c) {
    if (dim == 1) {
      m[c] = -mean_radius +
             2.0 * mean_radius * static_cast<double>(c) /
                 static_cast<double>(classes - 1);
    } else {
      const double angle =
          2.0 * std::numbers::pi * static_cast<double>(c) /
          static_cast<double>(classes);
      m[c * dim] = mean_radius * std::cos(angle);
      m[c * dim + 1] = mean_radius * std::sin(angle);
    }
  }
  return m;
}

SynthDataset generate_dataset(const SynthDatasetSpec& spec,
                              std::uint64_t master_seed) {
  spec.validate();
  const auto means = spec.resolved_means();
  SplitRng rng(master_seed, {rng_tag::kDataset, spec.seed});

  SynthDataset data;
  data.classes = spec.classes;
  data.dim = spec.dim;

  auto sample_split = [&](const std::vector<std::int64_t>& counts,
                          std::vector<double>& xs,
                          std::vector<std::int32_t>& ys) {
    for (std::size_t c = 0; c < spec.classes; ++c) {
      for (std::int64_t i = 0; i < counts[c]; ++i) {
        for (std::size_t j = 0; j < spec.dim; ++j) {
          xs.push_back(means[c * spec.dim + j] +
                       spec.class_sigma[c] * rng.next_normal());
        }
        ys.push_back(static_cast<std::int32_t>(c));
      }
    }
  };

  const auto labeled_counts =
      longtail_counts(spec.labeled_head, spec.gamma, spec.classes);
  const auto unlabeled_counts =
      longtail_counts(spec.unlabeled_head, spec.gamma, spec.classes);
  const std::vector<std::int64_t> test_counts(spec.classes,
                                              spec.test_per_class);

  sample_split(labeled_counts, data.labeled_x, data.labeled_y);
  sample_split(unlabeled_counts, data.unlabeled_x, data.unlabeled_true_y);
  sample_split(test_counts, data.test_x, data.test_y);

  std::vector<double> marginal(spec.classes);
  std::int64_t total = 0;
  for (std::size_t c = 0; c < spec.classes; ++c) {
    marginal[c] = static_cast<double>(labeled_counts[c] + unlabeled_counts[c]);
    total += labeled_counts[c] + unlabeled_counts[c];
  }
  for (double& m : marginal) m /= static_cast<double>(total);
  data.p_truth = SimplexVector::from_probs(std::move(marginal));
  return data;
}

void augment(std::span<const double> x, double sigma, SplitRng& rng,
             std::span<double> out) {
  require(sigma >= 0.0, ErrorCode::kInvalidArgument,
          "augmentation noise scale must be >= 0");
  require(out.size() == x.size(), ErrorCode::kDimensionMismatch,
          "augment output size mismatch");
  for (std::size_t j = 0; j < x.size(); ++j) {
    out[j] = x[j] + sigma * rng.next_normal();
  }
}

std::size_t ClassifierShape::param_count() const {
  if (kind == ModelKind::kLinear) return classes * dim + classes;
  return hidden * dim + hidden + classes * hidden + classes;
}

ClassifierParams ClassifierParams::zeros(ClassifierShape shape) {
  return ClassifierParams{shape, std::vector<double>(shape.param_count(), 0.0)};
}

ClassifierParams ClassifierParams::init(ClassifierShape shape, SplitRng& rng) {
  ClassifierParams p = zeros(shape);
  if (shape.kind == ModelKind::kMlp) {
    const double s1 = 1.0 / std::sqrt(static_cast<double>(shape.dim));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(shape.hidden));
    double* w1 = p.values.data();
    for (std::size_t i = 0; i < shape.hidden * shape.dim; ++i) {
      w1[i] = s1 * rng.next_normal();
    }
    double* w2 = p.values.data() + shape.hidden * shape.dim + shape.hidden;
    for (std::size_t i = 0; i < shape.classes * shape.hidden; ++i) {
      w2[i] = s2 * rng.next_normal();
    }
  }
  return p;
}

SimplexVector forward(const ClassifierParams& params,
                      std::span<const double> x) {
  require(x.size() == params.shape.dim, ErrorCode::kDimensionMismatch,
          "input dimension mismatch");
  ForwardScratch s;
  forward_into(params, x, s);
  return SimplexVector::from_probs(std::move(s.probs));
}

StepOutput loss_and_grad(const ClassifierParams& params,
                         std::span<const double> labeled_x,
                         std::span<const std::int32_t> labeled_y,
                         std::span<const double> unlabeled_weak_x,
                         std::span<const double> unlabeled_strong_x,
                         const DebiaserState& state) {
  const auto& sh = params.shape;
  const std::size_t bl = labeled_y.size();
  const std::size_t bu = unlabeled_weak_x.size() / sh.dim;
  require(bl >= 1, ErrorCode::kEmptyBatch, "empty labeled batch");
  require(bu >= 1, ErrorCode::kEmptyBatch, "empty unlabeled batch");
  require(labeled_x.size() == bl * sh.dim &&
              unlabeled_strong_x.size() == bu * sh.dim,
          ErrorCode::kDimensionMismatch, "batch feature size mismatch");

  StepOutput out;
  out.grads.assign(sh.param_count(), 0.0);
  ForwardScratch s;

  // Supervised branch on the weak views.
  const double inv_bl = 1.0 / static_cast<double>(bl);
  for (std::size_t i = 0; i < bl; ++i) {
    const auto x = row_span(labeled_x, i, sh.dim);
    forward_into(params, x, s);
    const auto y = static_cast<std::size_t>(labeled_y[i]);
    require(y < sh.classes, ErrorCode::kLabelOutOfRange,
            "labeled target outside [0, C)");
    out.loss_l += negative_log_prob(s.probs[y]);
    accumulate_grad(params, x, s, y, inv_bl, out.grads);
  }
  out.loss_l *= inv_bl;

  // Weak predictions feed pseudo-label generation only; no gradient flows
  // through them.
  out.batch_p_w.reserve(bu);
  for (std::size_t i = 0; i < bu; ++i) {
    forward_into(params, row_span(unlabeled_weak_x, i, sh.dim), s);
    out.batch_p_w.push_back(SimplexVector::from_probs(s.probs));
  }
  out.pb = generate(state, out.batch_p_w);

  // Consistency branch on the strong views; pb entries are constants.
  const double inv_bu = 1.0 / static_cast<double>(bu);
  double loss_u_sum = 0.0;
  for (std::size_t i = 0; i < bu; ++i) {
    if (!out.pb.masks[i]) continue;
    const auto x = row_span(unlabeled_strong_x, i, sh.dim);
    forward_into(params, x, s);
    const auto label = static_cast<std::size_t>(out.pb.labels[i]);
    loss_u_sum += out.pb.weights[i] * negative_log_prob(s.probs[label]);
    accumulate_grad(params, x, s, label, out.pb.weights[i] * inv_bu,
                    out.grads);
  }
  out.loss_u = loss_u_sum * inv_bu;
  return out;
}

double loss_given_pseudo_batch(const ClassifierParams& params,
                               std::span<const double> labeled_x,
                               std::span<const std::int32_t> labeled_y,
                               std::span<const double> unlabeled_strong_x,
                               const PseudoBatch& pb) {
  const auto& sh = params.shape;
  const std::size_t bl = labeled_y.size();
  const std::size_t bu = pb.batch_size();
  require(unlabeled_strong_x.size() == bu * sh.dim,
          ErrorCode::kDimensionMismatch, "batch feature size mismatch");
  ForwardScratch s;
  double loss_l = 0.0;
  for (std::size_t i = 0; i < bl; ++i) {
    forward_into(params, row_span(labeled_x, i, sh.dim), s);
    loss_l += negative_log_prob(s.probs[static_cast<std::size_t>(labeled_y[i])]);
  }
  loss_l /= static_cast<double>(bl);
  double loss_u = 0.0;
  for (std::size_t i = 0; i < bu; ++i) {
    if (!pb.masks[i]) continue;
    forward_into(params, row_span(unlabeled_strong_x, i, sh.dim), s);
    loss_u += pb.weights[i] *
              negative_log_prob(s.probs[static_cast<std::size_t>(pb.labels[i])]);
  }
  loss_u /= static_cast<double>(bu);
  return loss_l + loss_u;
}

double lr_schedule(double lr0, std::int64_t k, std::int64_t total,
                   std::int64_t warmup) {
  if (total <= 0) return lr0;
  double lr = lr0 * std::cos(7.0 * std::numbers::pi * static_cast<double>(k) /
                             (16.0 * static_cast<double>(total)));
  if (warmup > 0 && k < warmup) {
    lr *= static_cast<double>(k) / static_cast<double>(warmup);
  }
  return lr;
}

void TrainConfig::validate() const {
  require(steps >= 0, ErrorCode::kInvalidArgument, "steps must be >= 0");
  require(warmup >= 0, ErrorCode::kInvalidArgument, "warmup must be >= 0");
  require(lr0 > 0.0, ErrorCode::kInvalidArgument, "lr must be > 0");
  require(batch_labeled >= 1 && batch_unlabeled >= 1,
          ErrorCode::kInvalidArgument, "batch sizes must be >= 1");
  require(sigma_weak >= 0.0 && sigma_strong >= 0.0,
          ErrorCode::kInvalidArgument, "noise scales must be >= 0");
  require(eval_every >= 1, ErrorCode::kInvalidArgument,
          "eval_every must be >= 1");
  require(model != ModelKind::kMlp || hidden >= 1,
          ErrorCode::kInvalidArgument, "mlp needs hidden >= 1");
  debiaser.validate();
}

TrainerData TrainerData::view(const SynthDataset& data) {
  TrainerData v;
  v.classes = data.classes;
  v.dim = data.dim;
  v.labeled_x = data.labeled_x;
  v.labeled_y = data.labeled_y;
  v.unlabeled_x = data.unlabeled_x;
  return v;
}

EvalContext EvalContext::view(const SynthDataset& data) {
  EvalContext v;
  v.test_x = data.test_x;
  v.test_y = data.test_y;
  v.p_truth = data.p_truth;
  return v;
}

namespace {

MetricsRow evaluate_row(std::int64_t step, double lr, double loss_l,
                        double loss_u, double util,
                        const ClassifierParams& params,
                        const DebiaserState& state, const EvalContext& eval) {
  MetricsRow row;
  row.step = step;
  row.lr = lr;
  row.loss_l = loss_l;
  row.loss_u = loss_u;
  row.util_ratio = util;
  row.kl_model_truth = kl_to_truth(state.p_model, eval.p_truth);
  row.kl_target_truth = kl_to_truth(state.p_target, eval.p_truth);

  const std::size_t n = eval.test_y.size();
  std::vector<std::int32_t> preds(n);
  ForwardScratch s;
  for (std::size_t i = 0; i < n; ++i) {
    forward_into(params, row_span(eval.test_x, i, params.shape.dim), s);
    preds[i] = static_cast<std::int32_t>(argmax_deterministic(s.probs));
  }
  row.test_error = error_rate(preds, eval.test_y);
  const auto acc =
      per_class_accuracy(preds, eval.test_y, params.shape.classes);
  row.class_accuracy.reserve(acc.size());
  for (const auto& a : acc) {
    row.class_accuracy.push_back(
        a ? *a : std::numeric_limits<double>::quiet_NaN());
  }
  return row;
}

}  // namespace

TrainOutcome train(const TrainConfig& cfg, const TrainerData& data,
                   const EvalContext& eval, std::uint64_t master_seed,
                   std::uint64_t run_seed) {
  cfg.validate();
  require(data.labeled_count() >= 1 && data.unlabeled_count() >= 1,
          ErrorCode::kDegenerateSpec, "training needs both splits");

  // Per-run stream. Draw order per step (part of the reproducibility
  // contract, mirrored by any reference loop):
  //   1. batch_labeled indices        (next_below)
  //   2. batch_unlabeled indices      (next_below)
  //   3. weak noise, labeled batch    (batch_labeled x dim normals)
  //   4. weak noise, unlabeled batch  (batch_unlabeled x dim normals)
  //   5. strong noise, unlabeled batch(batch_unlabeled x dim normals)
  // MLP initialization consumes its draws before the loop; linear models
  // start at zero without consuming any.
  SplitRng rng(master_seed, {rng_tag::kTrain, run_seed});

  ClassifierShape shape{cfg.model, data.classes, data.dim,
                        cfg.model == ModelKind::kMlp ? cfg.hidden : 0};
  ClassifierParams params = ClassifierParams::init(shape, rng);
  DebiaserState state = DebiaserState::initial(cfg.debiaser);

  TrainOutcome outcome{MetricsHistory{}, params, state};
  auto& history = outcome.history;
  history.rows.push_back(evaluate_row(0, lr_schedule(cfg.lr0, 0, cfg.steps,
                                                     cfg.warmup),
                                      0.0, 0.0, 0.0, params, state, eval));

  const std::size_t nl = data.labeled_count();
  const std::size_t nu = data.unlabeled_count();
  const std::size_t dim = data.dim;
  std::vector<double> lx(cfg.batch_labeled * dim);
  std::vector<std::int32_t> ly(cfg.batch_labeled);
  std::vector<double> uw(cfg.batch_unlabeled * dim);
  std::vector<double> us(cfg.batch_unlabeled * dim);
  std::vector<std::size_t> uidx(cfg.batch_unlabeled);

  for (std::int64_t k = 1; k <= cfg.steps; ++k) {
    const double lr = lr_schedule(cfg.lr0, k - 1, cfg.steps, cfg.warmup);

    for (std::size_t i = 0; i < cfg.batch_labeled; ++i) {
      const auto idx = static_cast<std::size_t>(rng.next_below(nl));
      ly[i] = data.labeled_y[idx];
      std::copy_n(data.labeled_x.data() + idx * dim, dim, lx.data() + i * dim);
    }
    for (std::size_t i = 0; i < cfg.batch_unlabeled; ++i) {
      uidx[i] = static_cast<std::size_t>(rng.next_below(nu));
    }
    for (std::size_t i = 0; i < cfg.batch_labeled; ++i) {
      augment({lx.data() + i * dim, dim}, cfg.sigma_weak, rng,
              {lx.data() + i * dim, dim});
    }
    for (std::size_t i = 0; i < cfg.batch_unlabeled; ++i) {
      augment({data.unlabeled_x.data() + uidx[i] * dim, dim}, cfg.sigma_weak,
              rng, {uw.data() + i * dim, dim});
    }
    for (std::size_t i = 0; i < cfg.batch_unlabeled; ++i) {
      augment({data.unlabeled_x.data() + uidx[i] * dim, dim}, cfg.sigma_strong,
              rng, {us.data() + i * dim, dim});
    }

    // Distribution bookkeeping sees this step's raw weak predictions before
    // generation, so pseudo labels are produced from the freshest estimates.
    std::vector<SimplexVector> batch_p_w;
    batch_p_w.reserve(cfg.batch_unlabeled);
    {
      ForwardScratch s;
      for (std::size_t i = 0; i < cfg.batch_unlabeled; ++i) {
        forward_into(params, {uw.data() + i * dim, dim}, s);
        batch_p_w.push_back(SimplexVector::from_probs(s.probs));
      }
    }
    state = update_model_dist(std::move(state), batch_p_w);
    state = update_target_dist(std::move(state));

    StepOutput step_out = loss_and_grad(params, lx, ly, uw, us, state);
    const double total_loss = step_out.loss_l + step_out.loss_u;
    if (!std::isfinite(total_loss)) {
      history.diverged = true;
      break;
    }

    for (std::size_t j = 0; j < params.values.size(); ++j) {
      params.values[j] -= lr * step_out.grads[j];
    }
    state.step = k;

    if (k % cfg.eval_every == 0 || k == cfg.steps) {
      history.rows.push_back(evaluate_row(
          k, lr, step_out.loss_l, step_out.loss_u,
          utilization_ratio(step_out.pb), params, state, eval));
    }
  }

  outcome.params = std::move(params);
  outcome.state = std::move(state);
  return outcome;
}

std::string metrics_to_csv(const MetricsHistory& history,
                           std::size_t classes) {
  std::string out =
      "step,lr,loss_l,loss_u,util_ratio,kl_model_truth,kl_target_truth,"
      "test_error";
  for (std::size_t c = 0; c < classes; ++c) {
    out += ",acc_class_" + std::to_string(c);
  }
  out += "\n";
  for (const auto& r : history.rows) {
    out += std::to_string(r.step);
    out += "," + format_double(r.lr);
    out += "," + format_double(r.loss_l);
    out += "," + format_double(r.loss_u);
    out += "," + format_double(r.util_ratio);
    out += "," + format_double(r.kl_model_truth);
    out += "," + format_double(r.kl_target_truth);
    out += "," + format_double(r.test_error);
    for (double a : r.class_accuracy) out += "," + format_double(a);
    out += "\n";
  }
  return out;
}

}  // namespace tamatch
