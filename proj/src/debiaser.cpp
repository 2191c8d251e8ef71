#include "tamatch/debiaser.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>

#include <nlohmann/json.hpp>

#include "tamatch/error.hpp"

namespace tamatch {

namespace {

constexpr double kDegenerateEps = 1e-12;

// Safety valve when reweighting runs unclipped; scaling factors can differ
// by orders of magnitude early in training.
constexpr double kUnclippedWeightCap = 1e6;

void warn_weight_cap_once() {
  static std::atomic<bool> warned{false};
  if (!warned.exchange(true)) {
    std::fprintf(stderr,
                 "tamatch: unclipped instance weight exceeded %.0e, capped\n",
                 kUnclippedWeightCap);
  }
}

void check_batch_dims(std::span<const SimplexVector> batch,
                      std::size_t classes) {
  require(!batch.empty(), ErrorCode::kEmptyBatch, "empty unlabeled batch");
  for (const auto& p : batch) {
    require(p.dim() == classes, ErrorCode::kDimensionMismatch,
            "batch prediction dimension does not match class count");
  }
}

}  // namespace

void DebiaserConfig::validate() const {
  require(classes >= 2, ErrorCode::kInvalidClassCount, "need C >= 2");
  require(tau > 0.0 && tau < 1.0, ErrorCode::kThresholdOutOfRange,
          "tau must lie in (0, 1)");
  require(lambda_model >= 0.0 && lambda_model <= 1.0,
          ErrorCode::kLambdaOutOfRange, "lambda_model must lie in [0, 1]");
  require(lambda_target >= 0.0 && lambda_target <= 1.0,
          ErrorCode::kLambdaOutOfRange, "lambda_target must lie in [0, 1]");
}

DebiaserConfig DebiaserConfig::baseline() const {
  DebiaserConfig b = *this;
  b.enable_rescale = false;
  b.enable_reweight = false;
  b.enable_clipping = false;
  b.enable_target_update = false;
  return b;
}

DebiaserState DebiaserState::initial(DebiaserConfig cfg) {
  cfg.validate();
  return DebiaserState{SimplexVector::uniform(cfg.classes),
                       SimplexVector::uniform(cfg.classes), 0, cfg};
}

PositiveVector scaling_factor(const DebiaserState& state) {
  std::vector<double> r(state.config.classes);
  for (std::size_t c = 0; c < r.size(); ++c) {
    require(state.p_model[c] > kDegenerateEps,
            ErrorCode::kDegenerateModelDistribution,
            "p_model has (near-)zero mass in class " + std::to_string(c));
    r[c] = state.p_target[c] / state.p_model[c];
  }
  return PositiveVector::from_values(std::move(r));
}

SimplexVector rescale(const SimplexVector& p_w, const PositiveVector& r) {
  require(p_w.dim() == r.dim(), ErrorCode::kDimensionMismatch,
          "rescale operands differ in dimension");
  std::vector<double> scaled(p_w.dim());
  for (std::size_t c = 0; c < scaled.size(); ++c) scaled[c] = p_w[c] * r[c];
  return normalize(scaled);
}

std::pair<double, double> adaptive_bound(const DebiaserState& state) {
  const double h = entropy(state.p_model);
  require(h > kDegenerateEps, ErrorCode::kDegenerateEntropy,
          "p_model collapsed to a point mass");
  const double kl = kl_divergence(state.p_model, state.p_target);
  const double r_max =
      1.0 + kl / (h / static_cast<double>(state.config.classes));
  const double r_min =
      state.config.weight_lower_mode == WeightLowerMode::kSymmetricReciprocal
          ? 1.0 / r_max
          : 1.0;
  return {r_min, r_max};
}

PseudoBatch generate(const DebiaserState& state,
                     std::span<const SimplexVector> batch_p_w) {
  const auto& cfg = state.config;
  check_batch_dims(batch_p_w, cfg.classes);

  // r is needed for rescaling and for weights; the bound only when clipping.
  const bool need_r = cfg.enable_rescale || cfg.enable_reweight;
  PositiveVector r = need_r ? scaling_factor(state)
                            : PositiveVector::from_values(
                                  std::vector<double>(cfg.classes, 1.0));
  double r_min = 1.0, r_max = 1.0;
  if (cfg.enable_reweight && cfg.enable_clipping) {
    std::tie(r_min, r_max) = adaptive_bound(state);
  }

  PseudoBatch pb;
  pb.labels.reserve(batch_p_w.size());
  pb.masks.reserve(batch_p_w.size());
  pb.weights.reserve(batch_p_w.size());
  for (const auto& p_w : batch_p_w) {
    // With rescaling off the raw prediction is used verbatim, not multiplied
    // by an all-ones r, so the baseline path is bit-identical to p_w.
    const SimplexVector q = cfg.enable_rescale ? rescale(p_w, r) : p_w;
    const std::size_t label = argmax_deterministic(q.probs());
    const bool masked = q[label] > cfg.tau;  // strict: equality fails

    double w = 1.0;
    if (cfg.enable_reweight) {
      w = r[label];
      if (cfg.enable_clipping) {
        w = std::clamp(w, r_min, r_max);
      } else if (w > kUnclippedWeightCap) {
        warn_weight_cap_once();
        w = kUnclippedWeightCap;
      }
    }
    pb.labels.push_back(static_cast<std::int32_t>(label));
    pb.masks.push_back(masked ? 1 : 0);
    pb.weights.push_back(w);
  }
  return pb;
}

DebiaserState update_model_dist(DebiaserState state,
                                std::span<const SimplexVector> batch_p_w) {
  check_batch_dims(batch_p_w, state.config.classes);
  std::vector<double> mean(state.config.classes, 0.0);
  for (const auto& p : batch_p_w) {
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += p[c];
  }
  const auto batch = static_cast<double>(batch_p_w.size());
  for (double& m : mean) m /= batch;
  state.p_model = ema_update(state.p_model,
                             SimplexVector::from_probs(std::move(mean)),
                             state.config.lambda_model);
  return state;
}

DebiaserState update_target_dist(DebiaserState state) {
  if (!state.config.enable_target_update) return state;
  state.p_target = ema_update(state.p_target, state.p_model,
                              state.config.lambda_target);
  return state;
}

double weighted_masked_ce(std::span<const SimplexVector> p_s,
                          const PseudoBatch& pb) {
  require(p_s.size() == pb.batch_size(), ErrorCode::kDimensionMismatch,
          "strong predictions and pseudo batch differ in size");
  double sum = 0.0;
  for (std::size_t i = 0; i < p_s.size(); ++i) {
    if (!pb.masks[i]) continue;
    const auto label = static_cast<std::size_t>(pb.labels[i]);
    require(label < p_s[i].dim(), ErrorCode::kDimensionMismatch,
            "pseudo label out of range for strong prediction");
    sum += pb.weights[i] * negative_log_prob(p_s[i][label]);
  }
  return sum / static_cast<double>(pb.batch_size());
}

std::string state_to_json(const DebiaserState& state) {
  nlohmann::json j;
  j["step"] = state.step;
  j["p_model"] = state.p_model.probs();
  j["p_target"] = state.p_target.probs();
  const auto& c = state.config;
  j["config"] = {
      {"classes", c.classes},
      {"tau", c.tau},
      {"lambda_model", c.lambda_model},
      {"lambda_target", c.lambda_target},
      {"rescale", c.enable_rescale},
      {"reweight", c.enable_reweight},
      {"clipping", c.enable_clipping},
      {"target_update", c.enable_target_update},
      {"weight_lower_mode",
       c.weight_lower_mode == WeightLowerMode::kSymmetricReciprocal
           ? "symmetric_reciprocal"
           : "paper_one"},
  };
  return j.dump();
}

DebiaserState state_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigError,
                std::string("invalid state snapshot: ") + e.what());
  }
  try {
    DebiaserConfig cfg;
    const auto& jc = j.at("config");
    cfg.classes = jc.at("classes").get<std::size_t>();
    cfg.tau = jc.at("tau").get<double>();
    cfg.lambda_model = jc.at("lambda_model").get<double>();
    cfg.lambda_target = jc.at("lambda_target").get<double>();
    cfg.enable_rescale = jc.at("rescale").get<bool>();
    cfg.enable_reweight = jc.at("reweight").get<bool>();
    cfg.enable_clipping = jc.at("clipping").get<bool>();
    cfg.enable_target_update = jc.at("target_update").get<bool>();
    const auto mode = jc.at("weight_lower_mode").get<std::string>();
    require(mode == "paper_one" || mode == "symmetric_reciprocal",
            ErrorCode::kConfigError, "unknown weight_lower_mode " + mode);
    cfg.weight_lower_mode = mode == "symmetric_reciprocal"
                                ? WeightLowerMode::kSymmetricReciprocal
                                : WeightLowerMode::kPaperOne;
    DebiaserState state = DebiaserState::initial(cfg);
    state.step = j.at("step").get<std::int64_t>();
    state.p_model =
        SimplexVector::from_probs(j.at("p_model").get<std::vector<double>>());
    state.p_target =
        SimplexVector::from_probs(j.at("p_target").get<std::vector<double>>());
    require(state.p_model.dim() == cfg.classes &&
                state.p_target.dim() == cfg.classes,
            ErrorCode::kDimensionMismatch,
            "snapshot distributions do not match class count");
    return state;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigError,
                std::string("incomplete state snapshot: ") + e.what());
  }
}

}  // namespace tamatch
