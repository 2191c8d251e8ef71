/*
 * tamatch: debiased pseudo-label generation/utilization for semi-supervised
 * training, plus the bias-amplification simulators and the synthetic
 * training harness behind the `tamatch` CLI.
 *
 * C ABI: opaque handles, integer status codes, UTF-8 strings. Every function
 * that can fail returns tamatch_status; on failure a human-readable message
 * is available from tamatch_last_error() on the same thread. Probability
 * buffers are row-major double arrays, batch_size x class_count.
 */
#ifndef TAMATCH_H
#define TAMATCH_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define TAMATCH_API __declspec(dllexport)
#else
#define TAMATCH_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tamatch_status {
  TAMATCH_OK = 0,
  TAMATCH_ERR_INVALID_ARGUMENT = 1,
  TAMATCH_ERR_DIMENSION_MISMATCH = 2,
  TAMATCH_ERR_DOMAIN = 3,            /* value outside its mathematical domain */
  TAMATCH_ERR_EMPTY_INPUT = 4,
  TAMATCH_ERR_DEGENERATE_STATE = 5,  /* collapsed model distribution etc. */
  TAMATCH_ERR_CONFIG = 6,
  TAMATCH_ERR_IO = 7,
  TAMATCH_ERR_NUMERIC = 8,           /* quadrature failure, non-finite logits */
  TAMATCH_ERR_DIVERGED = 9,          /* training loss became non-finite */
  TAMATCH_ERR_INTERNAL = 10
} tamatch_status;

TAMATCH_API const char* tamatch_version(void);
TAMATCH_API const char* tamatch_status_name(tamatch_status status);
/* Message for the most recent failure on this thread; never NULL. */
TAMATCH_API const char* tamatch_last_error(void);
TAMATCH_API void tamatch_string_free(char* text);

/* ------------------------------------------------------------------ */
/* Configuration: TOML-style text with [section] key = value entries.  */
/* ------------------------------------------------------------------ */

typedef struct tamatch_config tamatch_config;

TAMATCH_API tamatch_config* tamatch_config_new(void);
TAMATCH_API void tamatch_config_free(tamatch_config* cfg);
TAMATCH_API tamatch_status tamatch_config_load_file(tamatch_config* cfg,
                                                    const char* path);
TAMATCH_API tamatch_status tamatch_config_load_string(tamatch_config* cfg,
                                                      const char* text);
/* key is dotted, e.g. "debiaser.tau"; value is raw config text. */
TAMATCH_API tamatch_status tamatch_config_set(tamatch_config* cfg,
                                              const char* key,
                                              const char* value);
/* Serialized config; free the result with tamatch_string_free. */
TAMATCH_API tamatch_status tamatch_config_dump(const tamatch_config* cfg,
                                               char** text_out);

/* ------------------------------------------------------------------ */
/* Debiaser: the per-step rescale/threshold/weight state machine.      */
/* ------------------------------------------------------------------ */

typedef struct tamatch_debiaser tamatch_debiaser;

/* cfg may be NULL for defaults; otherwise its [debiaser] section applies
 * (tau, lambda_model, lambda_target, rescale, reweight, clipping,
 * target_update, weight_lower_mode). */
TAMATCH_API tamatch_status tamatch_debiaser_new(int32_t class_count,
                                                const tamatch_config* cfg,
                                                tamatch_debiaser** out);
TAMATCH_API void tamatch_debiaser_free(tamatch_debiaser* d);

/* One training step's bookkeeping: EMA-update the model distribution with
 * the batch mean of the raw weak-view probabilities, then the target
 * distribution, then advance the step counter. */
TAMATCH_API tamatch_status tamatch_debiaser_observe(tamatch_debiaser* d,
                                                    const double* weak_probs,
                                                    int32_t batch_size,
                                                    int32_t class_count);

/* Pure read: rescale -> threshold -> label -> weight. labels_out,
 * masks_out, weights_out must each hold batch_size entries. */
TAMATCH_API tamatch_status tamatch_debiaser_generate(
    const tamatch_debiaser* d, const double* weak_probs, int32_t batch_size,
    int32_t class_count, int32_t* labels_out, uint8_t* masks_out,
    double* weights_out);

/* Weighted, masked cross-entropy of strong-view probabilities against the
 * pseudo labels, averaged over the full batch size. */
TAMATCH_API tamatch_status tamatch_debiaser_unlabeled_loss(
    const tamatch_debiaser* d, const double* strong_probs, int32_t batch_size,
    int32_t class_count, const int32_t* labels, const uint8_t* masks,
    const double* weights, double* loss_out);

/* Per-class scaling factor r = p_target / p_model; r_out holds C entries. */
TAMATCH_API tamatch_status tamatch_debiaser_scaling_factor(
    const tamatch_debiaser* d, double* r_out);

/* Adaptive weight clipping interval. */
TAMATCH_API tamatch_status tamatch_debiaser_weight_bounds(
    const tamatch_debiaser* d, double* r_min_out, double* r_max_out);

TAMATCH_API tamatch_status tamatch_debiaser_model_dist(
    const tamatch_debiaser* d, double* probs_out);
TAMATCH_API tamatch_status tamatch_debiaser_target_dist(
    const tamatch_debiaser* d, double* probs_out);
TAMATCH_API int64_t tamatch_debiaser_step_count(const tamatch_debiaser* d);

/* JSON state snapshot for checkpoint/resume; free with tamatch_string_free. */
TAMATCH_API tamatch_status tamatch_debiaser_snapshot(const tamatch_debiaser* d,
                                                     char** json_out);
TAMATCH_API tamatch_status tamatch_debiaser_restore(tamatch_debiaser* d,
                                                    const char* json);

/* ------------------------------------------------------------------ */
/* Experiment runners backing the CLI subcommands. Each writes CSV     */
/* outputs plus manifest.json into out_dir. Master seed and worker     */
/* count come from the [run] section (run.seed, run.jobs).             */
/* ------------------------------------------------------------------ */

TAMATCH_API tamatch_status tamatch_run_bias_sim(const tamatch_config* cfg,
                                                const char* out_dir);
TAMATCH_API tamatch_status tamatch_run_logistic_sim(const tamatch_config* cfg,
                                                    const char* out_dir);
TAMATCH_API tamatch_status tamatch_run_train(const tamatch_config* cfg,
                                             const char* out_dir);
TAMATCH_API tamatch_status tamatch_run_ablate(const tamatch_config* cfg,
                                              const char* out_dir);
TAMATCH_API tamatch_status tamatch_run_rank(const char* table_path,
                                            const tamatch_config* cfg,
                                            const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* TAMATCH_H */
