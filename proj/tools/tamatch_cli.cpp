// Experiment driver for the tamatch library. Everything goes through the
// public C API; this translation unit never touches the C++ core directly.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tamatch.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct ConfigDeleter {
  void operator()(tamatch_config* cfg) const { tamatch_config_free(cfg); }
};
using ConfigPtr = std::unique_ptr<tamatch_config, ConfigDeleter>;

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "tamatch_out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::int64_t jobs = 0;  // 0 = leave to config/default
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "config file (TOML-style)");
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--seed", opts.seed, "master seed (recorded in the manifest)")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--jobs", opts.jobs, "worker threads")->check(CLI::Range(1, 1024));
}

int config_failure(const char* what) {
  std::fprintf(stderr, "config error (%s): %s\n", what, tamatch_last_error());
  return kExitConfig;
}

// Build the config handle from file + flag overrides. Returns kExitOk or an
// exit code on failure.
int resolve_config(const CommonOpts& opts,
                   const std::vector<std::pair<std::string, std::string>>& sets,
                   ConfigPtr& out) {
  out.reset(tamatch_config_new());
  if (!out) {
    std::fprintf(stderr, "out of memory\n");
    return kExitRuntime;
  }
  if (!opts.config_path.empty() &&
      tamatch_config_load_file(out.get(), opts.config_path.c_str()) !=
          TAMATCH_OK) {
    return config_failure(opts.config_path.c_str());
  }
  for (const auto& [key, value] : sets) {
    if (tamatch_config_set(out.get(), key.c_str(), value.c_str()) !=
        TAMATCH_OK) {
      return config_failure(key.c_str());
    }
  }
  if (opts.seed_set &&
      tamatch_config_set(out.get(), "run.seed",
                         std::to_string(opts.seed).c_str()) != TAMATCH_OK) {
    return config_failure("run.seed");
  }
  if (opts.jobs > 0 &&
      tamatch_config_set(out.get(), "run.jobs",
                         std::to_string(opts.jobs).c_str()) != TAMATCH_OK) {
    return config_failure("run.jobs");
  }
  return kExitOk;
}

int finish(tamatch_status status, const std::string& out_dir) {
  if (status == TAMATCH_OK) {
    std::printf("wrote %s/manifest.json\n", out_dir.c_str());
    return kExitOk;
  }
  std::fprintf(stderr, "%s: %s\n", tamatch_status_name(status),
               tamatch_last_error());
  return status == TAMATCH_ERR_CONFIG ? kExitConfig : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tamatch: debiased pseudo-label experiments"};
  app.set_version_flag("--version", tamatch_version());
  app.require_subcommand(1);

  CommonOpts bias_opts;
  std::int64_t bias_trajectories = 0;
  std::int64_t bias_steps = 0;
  auto* bias = app.add_subcommand(
      "bias-sim", "categorical self-training bias amplification sweep");
  add_common(bias, bias_opts);
  bias->add_option("--trajectories", bias_trajectories,
                   "trajectories per grid point");
  bias->add_option("--steps", bias_steps, "update steps per trajectory");

  CommonOpts logistic_opts;
  auto* logistic = app.add_subcommand(
      "logistic-sim", "1-D logistic self-training dynamics");
  add_common(logistic, logistic_opts);

  CommonOpts train_opts;
  std::vector<std::string> train_ablate;
  auto* train = app.add_subcommand(
      "train", "synthetic semi-supervised training runs");
  add_common(train, train_opts);
  train
      ->add_option("--ablate", train_ablate,
                   "force a debiaser feature off "
                   "(rescale|reweight|clipping|target_update)")
      ->check(CLI::IsMember(
          {"rescale", "reweight", "clipping", "target_update"}));

  CommonOpts ablate_opts;
  auto* ablate = app.add_subcommand(
      "ablate", "train the ablation variant grid and emit an error table");
  add_common(ablate, ablate_opts);

  CommonOpts rank_opts;
  std::string table_path;
  auto* rank = app.add_subcommand(
      "rank", "Friedman-rank methods from an error table");
  add_common(rank, rank_opts);
  rank->add_option("table", table_path, "error table CSV")->required();

  CLI11_PARSE(app, argc, argv);

  ConfigPtr cfg;
  if (bias->parsed()) {
    std::vector<std::pair<std::string, std::string>> sets;
    if (bias_trajectories > 0) {
      sets.emplace_back("sim.trajectories", std::to_string(bias_trajectories));
    }
    if (bias_steps > 0) sets.emplace_back("sim.steps", std::to_string(bias_steps));
    if (int rc = resolve_config(bias_opts, sets, cfg); rc != kExitOk) return rc;
    return finish(tamatch_run_bias_sim(cfg.get(), bias_opts.out_dir.c_str()),
                  bias_opts.out_dir);
  }
  if (logistic->parsed()) {
    if (int rc = resolve_config(logistic_opts, {}, cfg); rc != kExitOk) return rc;
    return finish(
        tamatch_run_logistic_sim(cfg.get(), logistic_opts.out_dir.c_str()),
        logistic_opts.out_dir);
  }
  if (train->parsed()) {
    std::vector<std::pair<std::string, std::string>> sets;
    for (const auto& feature : train_ablate) {
      sets.emplace_back("debiaser." + feature, "false");
    }
    if (int rc = resolve_config(train_opts, sets, cfg); rc != kExitOk) return rc;
    return finish(tamatch_run_train(cfg.get(), train_opts.out_dir.c_str()),
                  train_opts.out_dir);
  }
  if (ablate->parsed()) {
    if (int rc = resolve_config(ablate_opts, {}, cfg); rc != kExitOk) return rc;
    return finish(tamatch_run_ablate(cfg.get(), ablate_opts.out_dir.c_str()),
                  ablate_opts.out_dir);
  }
  if (rank->parsed()) {
    if (int rc = resolve_config(rank_opts, {}, cfg); rc != kExitOk) return rc;
    return finish(tamatch_run_rank(table_path.c_str(), cfg.get(),
                                   rank_opts.out_dir.c_str()),
                  rank_opts.out_dir);
  }
  return kExitConfig;
}
