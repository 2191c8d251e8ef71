#pragma once

#include <string>

#include "tamatch/config.hpp"

namespace tamatch {

inline constexpr const char* kVersion = "0.1.0";

// Experiment runners behind the CLI subcommands. Each merges the user
// config over built-in defaults, resolves the master seed (recording an
// entropy-derived one when absent), executes with [run].jobs workers, and
// writes its CSV outputs plus a manifest.json into out_dir. All reductions
// are order-fixed, so jobs = 1 and jobs = N produce identical bytes.
// Errors are reported by throwing tamatch::Error.
void run_bias_sim(const ConfigMap& user_cfg, const std::string& out_dir);
void run_logistic_sim(const ConfigMap& user_cfg, const std::string& out_dir);
void run_train(const ConfigMap& user_cfg, const std::string& out_dir);
void run_ablate(const ConfigMap& user_cfg, const std::string& out_dir);
void run_rank(const std::string& table_path, const ConfigMap& user_cfg,
              const std::string& out_dir);

}  // namespace tamatch
