#include "tamatch/runner.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tamatch/bias_sim.hpp"
#include "tamatch/debiaser.hpp"
#include "tamatch/error.hpp"
#include "tamatch/format.hpp"
#include "tamatch/metrics.hpp"
#include "tamatch/synth_ssl.hpp"

namespace tamatch {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// infrastructure
// ---------------------------------------------------------------------------

// Index-addressed work pool. Tasks write results into slots keyed by their
// index, so the reduction order never depends on thread scheduling.
void parallel_for(std::size_t count, std::int64_t jobs,
                  const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(count);  // drain remaining work
        return;
      }
    }
  };
  const std::size_t n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
  std::vector<std::thread> threads;
  threads.reserve(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    require(out.good(), ErrorCode::kIoError,
            "failed to write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  require(!ec, ErrorCode::kIoError, "failed to move " + tmp.string());
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Seed resolution + manifest bookkeeping shared by every subcommand.
struct RunContext {
  std::string command;
  fs::path out_dir;
  ConfigMap resolved;
  std::uint64_t seed = 0;
  std::string seed_source;  // "config" or "entropy"
  std::int64_t jobs = 1;
  std::string started_at;
  std::vector<std::string> outputs;

  static RunContext open(const std::string& command, const ConfigMap& defaults,
                         const ConfigMap& user_cfg,
                         const std::string& out_dir) {
    RunContext ctx;
    ctx.command = command;
    ctx.out_dir = out_dir;
    ctx.started_at = iso_timestamp();
    ctx.resolved = defaults;
    ctx.resolved.merge_over(user_cfg);
    if (ctx.resolved.has("run.seed")) {
      const std::int64_t s = ctx.resolved.get_int("run.seed");
      ctx.seed = static_cast<std::uint64_t>(s);
      ctx.seed_source = "config";
    } else {
      // Derive one from entropy and record it so the run stays replayable.
      std::random_device rd;
      ctx.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
      ctx.seed_source = "entropy";
      ctx.resolved.set("run.seed", std::to_string(ctx.seed));
    }
    ctx.jobs = ctx.resolved.get_int("run.jobs", 1);
    require(ctx.jobs >= 1, ErrorCode::kConfigError, "run.jobs must be >= 1");
    fs::create_directories(ctx.out_dir);
    return ctx;
  }

  void emit(const std::string& filename, const std::string& content) {
    write_file_atomic(out_dir / filename, content);
    outputs.push_back(filename);
  }

  void write_manifest() {
    nlohmann::json j;
    j["command"] = command;
    j["version"] = kVersion;
    j["seed"] = seed;
    j["seed_source"] = seed_source;
    j["started_at"] = started_at;
    j["finished_at"] = iso_timestamp();
    j["outputs"] = outputs;
    j["config"] = nlohmann::json::object();
    for (const auto& [k, v] : resolved.entries()) j["config"][k] = v;
    write_file_atomic(out_dir / "manifest.json", j.dump(2) + "\n");
  }
};

// ---------------------------------------------------------------------------
// defaults and typed-config builders
// ---------------------------------------------------------------------------

ConfigMap run_defaults() {
  ConfigMap d;
  d.set("run.jobs", "1");
  return d;
}

ConfigMap bias_sim_defaults() {
  ConfigMap d = run_defaults();
  d.set("sim.trajectories", "1000");
  d.set("sim.steps", "1000");
  d.set("sim.eta", "1.0");
  d.set("sim.n_list", "[2, 4, 8, 16, 64]");
  return d;
}

ConfigMap logistic_defaults() {
  ConfigMap d = run_defaults();
  d.set("logistic.tau", "0.95");
  d.set("logistic.b_init", "1.0");
  d.set("logistic.eta", "0.5");
  d.set("logistic.steps", "200");
  d.set("logistic.w0", "1.0");
  d.set("logistic.w1", "1.0");
  d.set("logistic.density", "standard_normal");
  d.set("logistic.mu0", "-2.0");
  d.set("logistic.mu1", "2.0");
  d.set("logistic.sigma", "1.0");
  return d;
}

ConfigMap train_defaults() {
  ConfigMap d = run_defaults();
  d.set("dataset.classes", "4");
  d.set("dataset.dim", "2");
  d.set("dataset.mean_radius", "2.0");
  d.set("dataset.sigma", "0.45");
  d.set("dataset.labeled_head", "5");
  d.set("dataset.unlabeled_head", "300");
  d.set("dataset.gamma", "10.0");
  d.set("dataset.test_per_class", "250");
  d.set("dataset.seed", "0");
  d.set("trainer.model", "linear");
  d.set("trainer.hidden", "16");
  d.set("trainer.steps", "3000");
  d.set("trainer.warmup", "0");
  d.set("trainer.lr", "0.3");
  d.set("trainer.batch_labeled", "64");
  d.set("trainer.batch_unlabeled", "128");
  d.set("trainer.eval_every", "50");
  d.set("trainer.seeds", "[0, 1, 2]");
  d.set("debiaser.tau", "0.95");
  d.set("debiaser.lambda_model", "0.999");
  d.set("debiaser.lambda_target", "1.0");
  d.set("debiaser.rescale", "true");
  d.set("debiaser.reweight", "true");
  d.set("debiaser.clipping", "true");
  d.set("debiaser.target_update", "true");
  d.set("debiaser.weight_lower_mode", "paper_one");
  return d;
}

ConfigMap ablate_defaults() {
  ConfigMap d = train_defaults();
  d.set("ablate.variants",
        "[full, no_rescale, no_reweight, no_target_update, no_clipping, "
        "baseline]");
  return d;
}

const std::vector<std::string> kRunKeys = {"run.seed", "run.jobs"};

std::vector<std::string> with_run_keys(std::vector<std::string> keys) {
  keys.insert(keys.end(), kRunKeys.begin(), kRunKeys.end());
  return keys;
}

// Range-checked integer lookup; rejects values before any size_t cast can
// wrap a negative into something enormous.
std::int64_t get_bounded(const ConfigMap& cfg, const std::string& key,
                         std::int64_t lo, std::int64_t hi) {
  const std::int64_t v = cfg.get_int(key);
  require(v >= lo && v <= hi, ErrorCode::kConfigError,
          key + " must lie in [" + std::to_string(lo) + ", " +
              std::to_string(hi) + "], got " + std::to_string(v));
  return v;
}

// Config files may be shared across subcommands, so a command only vets the
// sections it actually reads; foreign sections must merely be known ones.
void validate_user_keys(const ConfigMap& cfg,
                        const std::vector<std::string>& allowed) {
  static const std::vector<std::string> known_sections = {
      "run", "sim", "logistic", "dataset", "trainer", "debiaser", "ablate"};
  std::vector<std::string> owned;
  for (const auto& key : allowed) owned.push_back(key.substr(0, key.find('.')));
  for (const auto& [key, value] : cfg.entries()) {
    const std::string section = key.substr(0, key.find('.'));
    require(std::find(known_sections.begin(), known_sections.end(), section) !=
                known_sections.end(),
            ErrorCode::kConfigError, "unknown config section '" + section + "'");
    if (std::find(owned.begin(), owned.end(), section) != owned.end()) {
      require(std::find(allowed.begin(), allowed.end(), key) != allowed.end(),
              ErrorCode::kConfigError, "unknown config key '" + key + "'");
    }
  }
}

CategoricalSimConfig build_sim_config(const ConfigMap& cfg,
                                      std::uint64_t seed) {
  CategoricalSimConfig sim;
  sim.p1_grid = cfg.has("sim.p1_grid") ? cfg.get_double_list("sim.p1_grid")
                                       : CategoricalSimConfig::default_grid();
  require(!sim.p1_grid.empty(), ErrorCode::kConfigError,
          "sim.p1_grid must not be empty");
  for (double p : sim.p1_grid) {
    require(p > 0.0 && p < 1.0, ErrorCode::kProbabilityOutOfRange,
            "sim.p1_grid entries must lie in (0, 1)");
  }
  sim.steps = get_bounded(cfg, "sim.steps", 0, 100000000);
  sim.trajectories = get_bounded(cfg, "sim.trajectories", 1, 100000000);
  sim.eta = cfg.get_double("sim.eta");
  sim.seed = seed;
  return sim;
}

LogisticSimConfig build_logistic_config(const ConfigMap& cfg) {
  LogisticSimConfig lg;
  lg.tau = cfg.get_double("logistic.tau");
  lg.b_init = cfg.get_double("logistic.b_init");
  lg.eta = cfg.get_double("logistic.eta");
  lg.steps = cfg.get_int("logistic.steps");
  lg.w0 = cfg.get_double("logistic.w0");
  lg.w1 = cfg.get_double("logistic.w1");
  const std::string density = cfg.get_string("logistic.density");
  if (density == "standard_normal") {
    lg.density.kind = LogisticDensity::Kind::kStandardNormal;
  } else if (density == "two_component_mixture") {
    lg.density.kind = LogisticDensity::Kind::kTwoComponentMixture;
  } else {
    throw Error(ErrorCode::kConfigError,
                "logistic.density must be standard_normal or "
                "two_component_mixture");
  }
  lg.density.mu0 = cfg.get_double("logistic.mu0");
  lg.density.mu1 = cfg.get_double("logistic.mu1");
  lg.density.sigma = cfg.get_double("logistic.sigma");
  lg.validate();
  return lg;
}

SynthDatasetSpec build_dataset_spec(const ConfigMap& cfg) {
  SynthDatasetSpec spec;
  spec.classes =
      static_cast<std::size_t>(get_bounded(cfg, "dataset.classes", 2, 4096));
  spec.dim = static_cast<std::size_t>(get_bounded(cfg, "dataset.dim", 1, 4096));
  spec.mean_radius = cfg.get_double("dataset.mean_radius");
  if (cfg.has("dataset.means")) {
    spec.means = cfg.get_double_list("dataset.means");
  }
  if (cfg.has("dataset.sigma_per_class")) {
    spec.class_sigma = cfg.get_double_list("dataset.sigma_per_class");
  } else {
    spec.class_sigma.assign(spec.classes, cfg.get_double("dataset.sigma"));
  }
  spec.labeled_head = get_bounded(cfg, "dataset.labeled_head", 1, 10000000);
  spec.unlabeled_head = get_bounded(cfg, "dataset.unlabeled_head", 1, 10000000);
  spec.gamma = cfg.get_double("dataset.gamma");
  spec.test_per_class = get_bounded(cfg, "dataset.test_per_class", 1, 10000000);
  spec.seed = static_cast<std::uint64_t>(cfg.get_int("dataset.seed"));
  spec.validate();
  return spec;
}

DebiaserConfig build_debiaser_config(const ConfigMap& cfg,
                                     std::size_t classes) {
  DebiaserConfig dc;
  dc.classes = classes;
  dc.tau = cfg.get_double("debiaser.tau");
  dc.lambda_model = cfg.get_double("debiaser.lambda_model");
  dc.lambda_target = cfg.get_double("debiaser.lambda_target");
  dc.enable_rescale = cfg.get_bool("debiaser.rescale");
  dc.enable_reweight = cfg.get_bool("debiaser.reweight");
  dc.enable_clipping = cfg.get_bool("debiaser.clipping");
  dc.enable_target_update = cfg.get_bool("debiaser.target_update");
  const std::string mode = cfg.get_string("debiaser.weight_lower_mode");
  if (mode == "paper_one") {
    dc.weight_lower_mode = WeightLowerMode::kPaperOne;
  } else if (mode == "symmetric_reciprocal") {
    dc.weight_lower_mode = WeightLowerMode::kSymmetricReciprocal;
  } else {
    throw Error(ErrorCode::kConfigError,
                "debiaser.weight_lower_mode must be paper_one or "
                "symmetric_reciprocal");
  }
  dc.validate();
  return dc;
}

TrainConfig build_train_config(ConfigMap& cfg, const SynthDatasetSpec& spec) {
  TrainConfig tc;
  const std::string model = cfg.get_string("trainer.model");
  if (model == "linear") {
    tc.model = ModelKind::kLinear;
  } else if (model == "mlp") {
    tc.model = ModelKind::kMlp;
  } else {
    throw Error(ErrorCode::kConfigError, "trainer.model must be linear or mlp");
  }
  tc.hidden = static_cast<std::size_t>(get_bounded(cfg, "trainer.hidden", 1, 65536));
  tc.steps = get_bounded(cfg, "trainer.steps", 0, 1000000000);
  tc.warmup = get_bounded(cfg, "trainer.warmup", 0, 1000000000);
  tc.lr0 = cfg.get_double("trainer.lr");
  tc.batch_labeled = static_cast<std::size_t>(
      get_bounded(cfg, "trainer.batch_labeled", 1, 1000000));
  tc.batch_unlabeled = static_cast<std::size_t>(
      get_bounded(cfg, "trainer.batch_unlabeled", 1, 1000000));
  // Augmentation scales default to fractions of the head-class sigma.
  const double head_sigma = spec.class_sigma.front();
  tc.sigma_weak = cfg.get_double("trainer.sigma_weak", 0.1 * head_sigma);
  tc.sigma_strong = cfg.get_double("trainer.sigma_strong", 0.5 * head_sigma);
  cfg.set("trainer.sigma_weak", format_double(tc.sigma_weak));
  cfg.set("trainer.sigma_strong", format_double(tc.sigma_strong));
  tc.eval_every = get_bounded(cfg, "trainer.eval_every", 1, 1000000000);
  tc.debiaser = build_debiaser_config(cfg, spec.classes);
  tc.validate();
  return tc;
}

std::vector<std::uint64_t> build_seed_list(const ConfigMap& cfg) {
  std::vector<std::uint64_t> seeds;
  for (std::int64_t s : cfg.get_int_list("trainer.seeds")) {
    seeds.push_back(static_cast<std::uint64_t>(s));
  }
  require(!seeds.empty(), ErrorCode::kConfigError,
          "trainer.seeds must not be empty");
  return seeds;
}

const std::vector<std::string> kTrainKeys = {
    "dataset.classes",      "dataset.dim",
    "dataset.mean_radius",  "dataset.means",
    "dataset.sigma",        "dataset.sigma_per_class",
    "dataset.labeled_head", "dataset.unlabeled_head",
    "dataset.gamma",        "dataset.test_per_class",
    "dataset.seed",         "trainer.model",
    "trainer.hidden",       "trainer.steps",
    "trainer.warmup",       "trainer.lr",
    "trainer.batch_labeled", "trainer.batch_unlabeled",
    "trainer.sigma_weak",   "trainer.sigma_strong",
    "trainer.eval_every",   "trainer.seeds",
    "debiaser.tau",         "debiaser.lambda_model",
    "debiaser.lambda_target", "debiaser.rescale",
    "debiaser.reweight",    "debiaser.clipping",
    "debiaser.target_update", "debiaser.weight_lower_mode"};

double time_avg_kl(const MetricsHistory& history) {
  double sum = 0.0;
  for (const auto& r : history.rows) sum += r.kl_model_truth;
  return sum / static_cast<double>(history.rows.size());
}

nlohmann::json aggregate_json(const std::vector<double>& values) {
  const Aggregate agg = seed_aggregate(values);
  return {{"per_seed", values},
          {"mean", agg.mean},
          {"std", agg.stddev},
          {"single_sample", agg.single_sample}};
}

}  // namespace

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

void run_bias_sim(const ConfigMap& user_cfg, const std::string& out_dir) {
  validate_user_keys(user_cfg, with_run_keys(
      {"sim.p1_grid", "sim.n_list", "sim.trajectories", "sim.steps",
       "sim.eta"}));
  RunContext ctx = RunContext::open("bias-sim", bias_sim_defaults(), user_cfg,
                                    out_dir);
  const CategoricalSimConfig base = build_sim_config(ctx.resolved, ctx.seed);
  const std::vector<std::int64_t> n_list = ctx.resolved.get_int_list("sim.n_list");
  require(!n_list.empty(), ErrorCode::kConfigError,
          "sim.n_list must not be empty");

  // One task per (grid point, n) cell; trajectories run inside the task on
  // their own keyed streams, so scheduling cannot reorder anything.
  struct Cell {
    std::size_t grid_index;
    std::int64_t n;
    AmplificationEstimate estimate;
  };
  std::vector<Cell> cells;
  for (std::size_t g = 0; g < base.p1_grid.size(); ++g) {
    for (std::int64_t n : n_list) {
      require(n >= 1 && n <= 100000000, ErrorCode::kConfigError,
              "sim.n_list entries must lie in [1, 1e8]");
      cells.push_back({g, n, {}});
    }
  }
  parallel_for(cells.size(), ctx.jobs, [&](std::size_t i) {
    CategoricalSimConfig cfg = base;
    cfg.samples_per_step = cells[i].n;
    cells[i].estimate = amplification_probability(cfg, cells[i].grid_index);
  });

  std::string csv =
      "p1_init,n,trajectories,steps,eta,amplification_prob,stderr\n";
  for (const auto& cell : cells) {
    csv += format_double(base.p1_grid[cell.grid_index]);
    csv += "," + std::to_string(cell.n);
    csv += "," + std::to_string(base.trajectories);
    csv += "," + std::to_string(base.steps);
    csv += "," + format_double(base.eta);
    csv += "," + format_double(cell.estimate.probability);
    csv += "," + format_double(cell.estimate.std_error);
    csv += "\n";
  }
  ctx.emit("bias_sim.csv", csv);
  ctx.write_manifest();
}

void run_logistic_sim(const ConfigMap& user_cfg, const std::string& out_dir) {
  validate_user_keys(user_cfg, with_run_keys(
      {"logistic.tau", "logistic.b_init", "logistic.eta", "logistic.steps",
       "logistic.w0", "logistic.w1", "logistic.density", "logistic.mu0",
       "logistic.mu1", "logistic.sigma"}));
  RunContext ctx = RunContext::open("logistic-sim", logistic_defaults(),
                                    user_cfg, out_dir);
  const LogisticSimConfig cfg = build_logistic_config(ctx.resolved);
  const double h = logistic_h(cfg.tau);

  std::string csv = "step,b,Q0,Q1,p_yhat0,p_yhat1\n";
  double b = cfg.b_init;
  for (std::int64_t step = 0; step <= cfg.steps; ++step) {
    const double q0 = logistic_q(b, h, cfg.density, QSide::kQ0);
    const double q1 = logistic_q(b, h, cfg.density, QSide::kQ1);
    csv += std::to_string(step);
    csv += "," + format_double(b);
    csv += "," + format_double(q0);
    csv += "," + format_double(q1);
    csv += "," + format_double(pseudo_label_mass(b, h, cfg.density, QSide::kQ0));
    csv += "," + format_double(pseudo_label_mass(b, h, cfg.density, QSide::kQ1));
    csv += "\n";
    b = logistic_step(b, cfg, q0, q1);
  }
  ctx.emit("logistic_sim.csv", csv);
  ctx.write_manifest();
}

void run_train(const ConfigMap& user_cfg, const std::string& out_dir) {
  validate_user_keys(user_cfg, with_run_keys(kTrainKeys));
  RunContext ctx = RunContext::open("train", train_defaults(), user_cfg,
                                    out_dir);
  const SynthDatasetSpec spec = build_dataset_spec(ctx.resolved);
  const TrainConfig tc = build_train_config(ctx.resolved, spec);
  const std::vector<std::uint64_t> seeds = build_seed_list(ctx.resolved);

  const SynthDataset data = generate_dataset(spec, ctx.seed);
  const TrainerData trainer_view = TrainerData::view(data);
  const EvalContext eval_view = EvalContext::view(data);

  std::vector<TrainOutcome> outcomes(seeds.size(),
                                     TrainOutcome{MetricsHistory{},
                                                  ClassifierParams{},
                                                  DebiaserState::initial(
                                                      tc.debiaser)});
  parallel_for(seeds.size(), ctx.jobs, [&](std::size_t i) {
    outcomes[i] = train(tc, trainer_view, eval_view, ctx.seed, seeds[i]);
  });

  std::vector<double> final_errors, kl_means;
  bool any_diverged = false;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto& history = outcomes[i].history;
    ctx.emit("metrics_seed_" + std::to_string(seeds[i]) + ".csv",
             metrics_to_csv(history, spec.classes));
    ctx.emit("state_seed_" + std::to_string(seeds[i]) + ".json",
             state_to_json(outcomes[i].state) + "\n");
    final_errors.push_back(history.rows.back().test_error);
    kl_means.push_back(time_avg_kl(history));
    any_diverged = any_diverged || history.diverged;
  }

  nlohmann::json agg;
  agg["seeds"] = seeds;
  agg["final_test_error"] = aggregate_json(final_errors);
  agg["time_avg_kl_model_truth"] = aggregate_json(kl_means);
  agg["diverged"] = any_diverged;
  ctx.emit("aggregate.json", agg.dump(2) + "\n");
  ctx.write_manifest();
  require(!any_diverged, ErrorCode::kDivergedTraining,
          "training diverged; partial metrics written to " + out_dir);
}

void run_ablate(const ConfigMap& user_cfg, const std::string& out_dir) {
  auto keys = with_run_keys(kTrainKeys);
  keys.push_back("ablate.variants");
  validate_user_keys(user_cfg, keys);
  RunContext ctx = RunContext::open("ablate", ablate_defaults(), user_cfg,
                                    out_dir);
  const SynthDatasetSpec spec = build_dataset_spec(ctx.resolved);
  const TrainConfig tc = build_train_config(ctx.resolved, spec);
  const std::vector<std::uint64_t> seeds = build_seed_list(ctx.resolved);

  const std::vector<std::string> variants =
      ctx.resolved.get_string_list("ablate.variants");
  require(!variants.empty(), ErrorCode::kConfigError,
          "ablate.variants must not be empty");

  auto variant_config = [&](const std::string& name) {
    DebiaserConfig dc = tc.debiaser;
    if (name == "full") return dc;
    if (name == "no_rescale") { dc.enable_rescale = false; return dc; }
    if (name == "no_reweight") { dc.enable_reweight = false; return dc; }
    if (name == "no_target_update") { dc.enable_target_update = false; return dc; }
    if (name == "no_clipping") { dc.enable_clipping = false; return dc; }
    if (name == "baseline") return dc.baseline();
    throw Error(ErrorCode::kConfigError, "unknown ablation variant " + name);
  };
  for (const auto& v : variants) variant_config(v);  // validate names upfront

  const SynthDataset data = generate_dataset(spec, ctx.seed);
  const TrainerData trainer_view = TrainerData::view(data);
  const EvalContext eval_view = EvalContext::view(data);

  // runs are (variant, seed) pairs, reduced in that order
  std::vector<double> errors(variants.size() * seeds.size(), 0.0);
  std::atomic<bool> any_diverged{false};
  parallel_for(errors.size(), ctx.jobs, [&](std::size_t i) {
    const std::size_t v = i / seeds.size();
    const std::size_t s = i % seeds.size();
    TrainConfig vc = tc;
    vc.debiaser = variant_config(variants[v]);
    const TrainOutcome outcome =
        train(vc, trainer_view, eval_view, ctx.seed, seeds[s]);
    errors[i] = outcome.history.rows.back().test_error;
    if (outcome.history.diverged) any_diverged.store(true);
  });

  ErrorTable table;
  table.methods = variants;
  for (std::uint64_t s : seeds) table.tasks.push_back("seed_" + std::to_string(s));
  for (std::size_t v = 0; v < variants.size(); ++v) {
    table.error.emplace_back(errors.begin() + v * seeds.size(),
                             errors.begin() + (v + 1) * seeds.size());
  }
  ctx.emit("ablation_table.csv", error_table_to_csv(table));
  ctx.write_manifest();
  require(!any_diverged.load(), ErrorCode::kDivergedTraining,
          "an ablation run diverged; table written to " + out_dir);
}

void run_rank(const std::string& table_path, const ConfigMap& user_cfg,
              const std::string& out_dir) {
  validate_user_keys(user_cfg, with_run_keys({}));
  RunContext ctx = RunContext::open("rank", run_defaults(), user_cfg, out_dir);
  const ErrorTable table = load_error_table(table_path);
  const std::vector<double> ranks = friedman_rank(table);

  struct Row { std::string method; double rank, mean_error; };
  std::vector<Row> rows;
  for (std::size_t m = 0; m < table.methods.size(); ++m) {
    double mean = 0.0;
    for (double e : table.error[m]) mean += e;
    mean /= static_cast<double>(table.tasks.size());
    rows.push_back({table.methods[m], ranks[m], mean});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.rank < b.rank; });

  std::string csv = "method,mean_rank,mean_error\n";
  for (const auto& r : rows) {
    csv += r.method + "," + format_double(r.rank) + "," +
           format_double(r.mean_error) + "\n";
  }
  std::fputs(csv.c_str(), stdout);
  ctx.emit("rank.csv", csv);
  ctx.write_manifest();
}

}  // namespace tamatch
