#include "tamatch.h"

#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "tamatch/config.hpp"
#include "tamatch/debiaser.hpp"
#include "tamatch/error.hpp"
#include "tamatch/runner.hpp"
#include "tamatch/simplex.hpp"

using tamatch::ConfigMap;
using tamatch::DebiaserState;
using tamatch::Error;
using tamatch::ErrorCode;
using tamatch::SimplexVector;

struct tamatch_config {
  ConfigMap map;
};

struct tamatch_debiaser {
  DebiaserState state;
};

namespace {

thread_local std::string g_last_error;

tamatch_status map_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kLambdaOutOfRange:
    case ErrorCode::kInvalidClassCount:
    case ErrorCode::kInvalidGamma:
      return TAMATCH_ERR_INVALID_ARGUMENT;
    case ErrorCode::kDimensionMismatch:
      return TAMATCH_ERR_DIMENSION_MISMATCH;
    case ErrorCode::kAllZeroVector:
    case ErrorCode::kNegativeEntry:
    case ErrorCode::kUnsupportedSupport:
    case ErrorCode::kSimplexViolation:
    case ErrorCode::kPositivityViolation:
    case ErrorCode::kProbabilityOutOfRange:
    case ErrorCode::kThresholdOutOfRange:
    case ErrorCode::kLabelOutOfRange:
      return TAMATCH_ERR_DOMAIN;
    case ErrorCode::kEmptyVector:
    case ErrorCode::kEmptyBatch:
    case ErrorCode::kEmptyInput:
      return TAMATCH_ERR_EMPTY_INPUT;
    case ErrorCode::kDegenerateModelDistribution:
    case ErrorCode::kDegenerateEntropy:
    case ErrorCode::kDegenerateSpec:
      return TAMATCH_ERR_DEGENERATE_STATE;
    case ErrorCode::kConfigError:
    case ErrorCode::kMalformedTable:
      return TAMATCH_ERR_CONFIG;
    case ErrorCode::kIoError:
      return TAMATCH_ERR_IO;
    case ErrorCode::kQuadratureNonConvergence:
    case ErrorCode::kNonFiniteLogit:
      return TAMATCH_ERR_NUMERIC;
    case ErrorCode::kDivergedTraining:
      return TAMATCH_ERR_DIVERGED;
  }
  return TAMATCH_ERR_INTERNAL;
}

tamatch_status fail(tamatch_status status, const char* message) {
  g_last_error = message;
  return status;
}

// Run `fn`, translating exceptions into status codes.
template <typename Fn>
tamatch_status guarded(Fn&& fn) {
  try {
    fn();
    return TAMATCH_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return map_code(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return TAMATCH_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TAMATCH_ERR_INTERNAL;
  }
}

tamatch_status check_batch_args(const void* probs, int32_t batch_size,
                                int32_t class_count, std::size_t expected_c) {
  if (probs == nullptr) {
    return fail(TAMATCH_ERR_INVALID_ARGUMENT, "probability buffer is NULL");
  }
  if (batch_size < 1) {
    return fail(TAMATCH_ERR_EMPTY_INPUT, "batch_size must be >= 1");
  }
  if (class_count < 2 ||
      static_cast<std::size_t>(class_count) != expected_c) {
    return fail(TAMATCH_ERR_DIMENSION_MISMATCH,
                "class_count does not match the debiaser");
  }
  return TAMATCH_OK;
}

std::vector<SimplexVector> batch_from_buffer(const double* probs,
                                             int32_t batch_size,
                                             int32_t class_count) {
  std::vector<SimplexVector> batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  for (int32_t i = 0; i < batch_size; ++i) {
    std::vector<double> row(probs + static_cast<std::size_t>(i) * class_count,
                            probs + static_cast<std::size_t>(i + 1) * class_count);
    batch.push_back(SimplexVector::from_probs(std::move(row)));
  }
  return batch;
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(::operator new(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* tamatch_version(void) { return tamatch::kVersion; }

const char* tamatch_status_name(tamatch_status status) {
  switch (status) {
    case TAMATCH_OK: return "ok";
    case TAMATCH_ERR_INVALID_ARGUMENT: return "invalid argument";
    case TAMATCH_ERR_DIMENSION_MISMATCH: return "dimension mismatch";
    case TAMATCH_ERR_DOMAIN: return "domain error";
    case TAMATCH_ERR_EMPTY_INPUT: return "empty input";
    case TAMATCH_ERR_DEGENERATE_STATE: return "degenerate state";
    case TAMATCH_ERR_CONFIG: return "configuration error";
    case TAMATCH_ERR_IO: return "io error";
    case TAMATCH_ERR_NUMERIC: return "numeric failure";
    case TAMATCH_ERR_DIVERGED: return "training diverged";
    case TAMATCH_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* tamatch_last_error(void) { return g_last_error.c_str(); }

void tamatch_string_free(char* text) { ::operator delete(text); }

/* ---- config ---- */

tamatch_config* tamatch_config_new(void) {
  return new (std::nothrow) tamatch_config{};
}

void tamatch_config_free(tamatch_config* cfg) { delete cfg; }

tamatch_status tamatch_config_load_file(tamatch_config* cfg,
                                        const char* path) {
  if (cfg == nullptr || path == nullptr) {
    return fail(TAMATCH_ERR_INVALID_ARGUMENT, "NULL config or path");
  }
  return guarded([&] {
    ConfigMap loaded = ConfigMap::parse_file(path);
    cfg->map.merge_over(loaded);
  });
}

tamatch_status tamatch_config_load_string(tamatch_config* cfg,
                                          const char* text) {
  if (cfg == nullptr || text == nullptr) {
    return fail(TAMATCH_ERR_INVALID_ARGUMENT, "NULL config or text");
  }
  return guarded([&] {
    ConfigMap loaded = ConfigMap::parse_string(text);
    cfg->map.merge_over(loaded);
  });
}

tamatch_status tamatch_config_set(tamatch_config* cfg, const char* key,
                                  const char* value) {
  if (cfg == nullptr || key == nullptr || value == nullptr) {
    return fail(TAMATCH_ERR_INVALID_ARGUMENT, "NULL config, key or value");
  }
  return guarded([&] { cfg->map.set(key, value); });
}

tamatch_status tamatch_config_dump(const tamatch_config* cfg,
                                   char** text_out) {
  if (cfg == nullptr || text_out == nullptr) {
    return fail(TAMATCH_ERR_INVALID_ARGUMENT, "NULL config or output");
  }
  return guarded([&] { *text_out = copy_string(cfg->map.dump()); });
}

/* ---- debiaser ---- */

tamatch_status tamatch_debiaser_new(int32_t class_count,
                                    const tamatch_config* cfg,
                                    tamatch_debiaser** out) {
  if (out == nullptr) {
    return fail(TAMATCH_ERR_INVALID_ARGUMENT, "NULL output handle");
  }
  *out = nullptr;
  return guarded([&] {
    tamatch::DebiaserConfig dc;
    if (cfg != nullptr) {
      const auto& m = cfg->map;
      dc.tau = m.get_double("debiaser.tau", dc.tau);
      dc.lambda_model = m.get_double("debiaser.lambda_model", dc.lambda_model);
      dc.lambda_target =
          m.get_double("debiaser.lambda_target", dc.lambda_target);
      dc.enable_rescale = m.get_bool("debiaser.rescale", dc.enable_rescale);
      dc.enable_reweight = m.get_bool("debiaser.reweight", dc.enable_reweight);
      dc.enable_clipping = m.get_bool("debiaser.clipping", dc.enable_clipping);
      dc.enable_target_update =
          m.get_bool("debiaser.target_update", dc.enable_target_update);
      const std::string mode =
          m.get_string("debiaser.weight_lower_mode", "paper_one");
      if (mode == "symmetric_reciprocal") {
        dc.weight_lower_mode = tamatch::WeightLowerMode::kSymmetricReciprocal;
      } else if (mode == "paper_one") {
        dc.weight_lower_mode = tamatch::WeightLowerMode::kPaperOne;
      } else {
        throw Error(ErrorCode::kConfigError,
                    "unknown weight_lower_mode " + mode);
      }
    }
    tamatch::require(class_count >= 2, ErrorCode::kInvalidClassCount,
                     "class_count must be >= 2");
    dc.classes = static_cast<std::size_t>(class_count);
    *out = new tamatch_debiaser{DebiaserState::initial(dc)};
  });
}

void tamatch_debiaser_free(tamatch_debiaser* d) { delete d; }

tamatch_status tamatch_debiaser_observe(tamatch_debiaser* d,
                                        const double* weak_probs,
                                        int32_t batch_size,
                                        int32_t class_count) {
  if (d == nullptr) return fail(TAMATCH_ERR_INVALID_ARGUMENT, "NULL debiaser");
  const auto pre = check_batch_args(weak_probs, batch_size, class_count,
                                    d->state.config.classes);
  if (pre != TAMATCH_OK) return pre;
  return guarded([&] {
    const auto batch = batch_from_buffer(weak_probs, batch_size, class_count);
    d->state = tamatch::update_model_dist(std::move(d->state), batch);
    d->state = tamatch::update_target_dist(std::move(d->state));
    d->state.step += 1;
  });
}

tamatch_status tamatch_debiaser_generate(const tamatch_debiaser* d,
                                         const double* weak_probs,
                                         int32_t batch_size,
                                         int32_t class_count,
                                         int32_t* labels_out,
                                         uint8_t* masks_out,
                                         double* weights_out) {
  if (d == nullptr) return fail(TAMATCH_ERR_INVALID_ARGUMENT, "NULL debiaser");
  if (labels_out == nullptr || masks_out == nullptr || weights_out == nullptr) {
    return fail(TAMATCH_ERR_INVALID_ARGUMENT, "NULL output buffer");
  }
  const auto pre = check_batch_args(weak_probs, batch_size, class_count,
                                    d->state.config.classes);
  if (pre != TAMATCH_OK) return pre;
  return guarded([&] {
    const auto batch = batch_from_buffer(weak_probs, batch_size, class_count);
    const tamatch::PseudoBatch pb = tamatch::generate(d->state, batch);
    for (int32_t i = 0; i < batch_size; ++i) {
      labels_out[i] = pb.labels[static_cast<std::size_t>(i)];
      masks_out[i] = pb.masks[static_cast<std::size_t>(i)];
      weights_out[i] = pb.weights[static_cast<std::size_t>(i)];
    }
  });
}

tamatch_status tamatch_debiaser_unlabeled_loss(
    const tamatch_debiaser* d, const double* strong_probs, int32_t batch_size,
    int32_t class_count, const int32_t* labels, const uint8_t* masks,
    const double* weights, double* loss_out) {
  if (d == nullptr) return fail(TAMATCH_ERR_INVALID_ARGUMENT, "NULL debiaser");
  if (labels == nullptr || masks == nullptr || weights == nullptr ||
      loss_out == nullptr) {
    return fail(TAMATCH_ERR_INVALID_ARGUMENT, "NULL buffer");
  }
  const auto pre = check_batch_args(strong_probs, batch_size, class_count,
                                    d->state.config.classes);
  if (pre != TAMATCH_OK) return pre;
  return guarded([&] {
    const auto batch = batch_from_buffer(strong_probs, batch_size, class_count);
    tamatch::PseudoBatch pb;
    pb.labels.assign(labels, labels + batch_size);
    pb.masks.assign(masks, masks + batch_size);
    pb.weights.assign(weights, weights + batch_size);
    *loss_out = tamatch::weighted_masked_ce(batch, pb);
  });
}

tamatch_status tamatch_debiaser_scaling_factor(const tamatch_debiaser* d,
                                               double* r_out) {
  if (d == nullptr || r_out == nullptr) {
    return fail(TAMATCH_ERR_INVALID_ARGUMENT, "NULL debiaser or buffer");
  }
  return guarded([&] {
    const tamatch::PositiveVector r = tamatch::scaling_factor(d->state);
    for (std::size_t c = 0; c < r.dim(); ++c) r_out[c] = r[c];
  });
}

tamatch_status tamatch_debiaser_weight_bounds(const tamatch_debiaser* d,
                                              double* r_min_out,
                                              double* r_max_out) {
  if (d == nullptr || r_min_out == nullptr || r_max_out == nullptr) {
    return fail(TAMATCH_ERR_INVALID_ARGUMENT, "NULL debiaser or buffer");
  }
  return guarded([&] {
    const auto [lo, hi] = tamatch::adaptive_bound(d->state);
    *r_min_out = lo;
    *r_max_out = hi;
  });
}

tamatch_status tamatch_debiaser_model_dist(const tamatch_debiaser* d,
                                           double* probs_out) {
  if (d == nullptr || probs_out == nullptr) {
    return fail(TAMATCH_ERR_INVALID_ARGUMENT, "NULL debiaser or buffer");
  }
  for (std::size_t c = 0; c < d->state.p_model.dim(); ++c) {
    probs_out[c] = d->state.p_model[c];
  }
  return TAMATCH_OK;
}

tamatch_status tamatch_debiaser_target_dist(const tamatch_debiaser* d,
                                            double* probs_out) {
  if (d == nullptr || probs_out == nullptr) {
    return fail(TAMATCH_ERR_INVALID_ARGUMENT, "NULL debiaser or buffer");
  }
  for (std::size_t c = 0; c < d->state.p_target.dim(); ++c) {
    probs_out[c] = d->state.p_target[c];
  }
  return TAMATCH_OK;
}

int64_t tamatch_debiaser_step_count(const tamatch_debiaser* d) {
  return d == nullptr ? -1 : d->state.step;
}

tamatch_status tamatch_debiaser_snapshot(const tamatch_debiaser* d,
                                         char** json_out) {
  if (d == nullptr || json_out == nullptr) {
    return fail(TAMATCH_ERR_INVALID_ARGUMENT, "NULL debiaser or output");
  }
  return guarded(
      [&] { *json_out = copy_string(tamatch::state_to_json(d->state)); });
}

tamatch_status tamatch_debiaser_restore(tamatch_debiaser* d,
                                        const char* json) {
  if (d == nullptr || json == nullptr) {
    return fail(TAMATCH_ERR_INVALID_ARGUMENT, "NULL debiaser or snapshot");
  }
  return guarded([&] { d->state = tamatch::state_from_json(json); });
}

/* ---- runners ---- */

static tamatch_status run_command(const tamatch_config* cfg,
                                  const char* out_dir,
                                  void (*fn)(const ConfigMap&,
                                             const std::string&)) {
  if (out_dir == nullptr) {
    return fail(TAMATCH_ERR_INVALID_ARGUMENT, "NULL output directory");
  }
  static const ConfigMap empty;
  const ConfigMap& map = cfg == nullptr ? empty : cfg->map;
  return guarded([&] { fn(map, out_dir); });
}

tamatch_status tamatch_run_bias_sim(const tamatch_config* cfg,
                                    const char* out_dir) {
  return run_command(cfg, out_dir, tamatch::run_bias_sim);
}

tamatch_status tamatch_run_logistic_sim(const tamatch_config* cfg,
                                        const char* out_dir) {
  return run_command(cfg, out_dir, tamatch::run_logistic_sim);
}

tamatch_status tamatch_run_train(const tamatch_config* cfg,
                                 const char* out_dir) {
  return run_command(cfg, out_dir, tamatch::run_train);
}

tamatch_status tamatch_run_ablate(const tamatch_config* cfg,
                                  const char* out_dir) {
  return run_command(cfg, out_dir, tamatch::run_ablate);
}

tamatch_status tamatch_run_rank(const char* table_path,
                                const tamatch_config* cfg,
                                const char* out_dir) {
  if (table_path == nullptr || out_dir == nullptr) {
    return fail(TAMATCH_ERR_INVALID_ARGUMENT, "NULL table path or out dir");
  }
  static const ConfigMap empty;
  const ConfigMap& map = cfg == nullptr ? empty : cfg->map;
  return guarded([&] { tamatch::run_rank(table_path, map, out_dir); });
}

}  // extern "C"
