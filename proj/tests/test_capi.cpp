// Exercises the shared library strictly through the public C header.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tamatch.h"

namespace fs = std::filesystem;

TEST_CASE("version and status names") {
  CHECK(std::strlen(tamatch_version()) > 0);
  CHECK(std::string(tamatch_status_name(TAMATCH_OK)) == "ok");
  CHECK(std::strlen(tamatch_status_name(TAMATCH_ERR_CONFIG)) > 0);
}

TEST_CASE("config handle round trip") {
  tamatch_config* cfg = tamatch_config_new();
  REQUIRE(cfg != nullptr);
  CHECK(tamatch_config_load_string(cfg, "[debiaser]\ntau = 0.9\n") ==
        TAMATCH_OK);
  CHECK(tamatch_config_set(cfg, "run.seed", "7") == TAMATCH_OK);
  CHECK(tamatch_config_set(cfg, "nodot", "7") == TAMATCH_ERR_CONFIG);
  CHECK(std::strlen(tamatch_last_error()) > 0);

  char* text = nullptr;
  REQUIRE(tamatch_config_dump(cfg, &text) == TAMATCH_OK);
  const std::string dumped(text);
  tamatch_string_free(text);
  CHECK(dumped.find("tau = 0.9") != std::string::npos);
  CHECK(dumped.find("seed = 7") != std::string::npos);

  CHECK(tamatch_config_load_string(cfg, "[oops\n") == TAMATCH_ERR_CONFIG);
  CHECK(tamatch_config_load_file(cfg, "/nonexistent.toml") == TAMATCH_ERR_IO);
  tamatch_config_free(cfg);
}

TEST_CASE("debiaser lifecycle over the C ABI") {
  tamatch_debiaser* d = nullptr;
  REQUIRE(tamatch_debiaser_new(2, nullptr, &d) == TAMATCH_OK);
  REQUIRE(d != nullptr);
  CHECK(tamatch_debiaser_step_count(d) == 0);

  double dist[2] = {0, 0};
  CHECK(tamatch_debiaser_model_dist(d, dist) == TAMATCH_OK);
  CHECK(dist[0] == 0.5);

  double r[2] = {0, 0};
  CHECK(tamatch_debiaser_scaling_factor(d, r) == TAMATCH_OK);
  CHECK(r[0] == 1.0);
  CHECK(r[1] == 1.0);

  double lo = -1, hi = -1;
  CHECK(tamatch_debiaser_weight_bounds(d, &lo, &hi) == TAMATCH_OK);
  CHECK(lo == 1.0);
  CHECK(hi == 1.0);

  // generate on a fresh uniform state: argmax labels, strict threshold
  const double weak[3 * 2] = {0.97, 0.03, 0.90, 0.10, 0.05, 0.95};
  std::int32_t labels[3];
  std::uint8_t masks[3];
  double weights[3];
  REQUIRE(tamatch_debiaser_generate(d, weak, 3, 2, labels, masks, weights) ==
          TAMATCH_OK);
  CHECK(labels[0] == 0);
  CHECK(labels[1] == 0);
  CHECK(labels[2] == 1);
  CHECK(masks[0] == 1);
  CHECK(masks[1] == 0);
  CHECK(masks[2] == 0);
  CHECK(weights[0] == 1.0);

  // weighted, masked CE averaged over the full batch
  const double strong[2 * 2] = {0.5, 0.5, 0.9, 0.1};
  const std::int32_t pl[2] = {0, 0};
  const std::uint8_t pm[2] = {1, 0};
  const double pw[2] = {1.0, 1.0};
  double loss = 0.0;
  REQUIRE(tamatch_debiaser_unlabeled_loss(d, strong, 2, 2, pl, pm, pw,
                                          &loss) == TAMATCH_OK);
  CHECK(loss == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-12));

  // observe advances the EMA and the step counter
  REQUIRE(tamatch_debiaser_observe(d, weak, 3, 2) == TAMATCH_OK);
  CHECK(tamatch_debiaser_step_count(d) == 1);
  CHECK(tamatch_debiaser_model_dist(d, dist) == TAMATCH_OK);
  CHECK(dist[0] != 0.5);  // moved toward the batch mean

  // snapshot -> restore into a fresh handle reproduces the state
  char* snap = nullptr;
  REQUIRE(tamatch_debiaser_snapshot(d, &snap) == TAMATCH_OK);
  tamatch_debiaser* d2 = nullptr;
  REQUIRE(tamatch_debiaser_new(2, nullptr, &d2) == TAMATCH_OK);
  REQUIRE(tamatch_debiaser_restore(d2, snap) == TAMATCH_OK);
  char* snap2 = nullptr;
  REQUIRE(tamatch_debiaser_snapshot(d2, &snap2) == TAMATCH_OK);
  CHECK(std::string(snap) == snap2);
  tamatch_string_free(snap);
  tamatch_string_free(snap2);
  CHECK(tamatch_debiaser_restore(d2, "garbage") == TAMATCH_ERR_CONFIG);

  tamatch_debiaser_free(d2);
  tamatch_debiaser_free(d);
}

TEST_CASE("debiaser honors the [debiaser] config section") {
  tamatch_config* cfg = tamatch_config_new();
  REQUIRE(tamatch_config_load_string(
              cfg, "[debiaser]\ntau = 0.5\nreweight = false\n") == TAMATCH_OK);
  tamatch_debiaser* d = nullptr;
  REQUIRE(tamatch_debiaser_new(2, cfg, &d) == TAMATCH_OK);
  const double weak[2] = {0.6, 0.4};
  std::int32_t label;
  std::uint8_t mask;
  double weight;
  REQUIRE(tamatch_debiaser_generate(d, weak, 1, 2, &label, &mask, &weight) ==
          TAMATCH_OK);
  CHECK(mask == 1);  // 0.6 > tau = 0.5
  tamatch_debiaser_free(d);

  REQUIRE(tamatch_config_load_string(cfg, "[debiaser]\ntau = 1.5\n") ==
          TAMATCH_OK);
  CHECK(tamatch_debiaser_new(2, cfg, &d) == TAMATCH_ERR_DOMAIN);
  tamatch_config_free(cfg);
}

TEST_CASE("argument validation errors") {
  tamatch_debiaser* d = nullptr;
  CHECK(tamatch_debiaser_new(1, nullptr, &d) == TAMATCH_ERR_INVALID_ARGUMENT);
  REQUIRE(tamatch_debiaser_new(3, nullptr, &d) == TAMATCH_OK);

  double weak[3] = {0.2, 0.3, 0.5};
  std::int32_t labels[1];
  std::uint8_t masks[1];
  double weights[1];
  CHECK(tamatch_debiaser_generate(d, nullptr, 1, 3, labels, masks, weights) ==
        TAMATCH_ERR_INVALID_ARGUMENT);
  CHECK(tamatch_debiaser_generate(d, weak, 0, 3, labels, masks, weights) ==
        TAMATCH_ERR_EMPTY_INPUT);
  CHECK(tamatch_debiaser_generate(d, weak, 1, 2, labels, masks, weights) ==
        TAMATCH_ERR_DIMENSION_MISMATCH);
  // rows must be valid distributions
  const double junk[3] = {0.9, 0.9, 0.9};
  CHECK(tamatch_debiaser_generate(d, junk, 1, 3, labels, masks, weights) ==
        TAMATCH_ERR_DOMAIN);
  CHECK(tamatch_debiaser_observe(nullptr, weak, 1, 3) ==
        TAMATCH_ERR_INVALID_ARGUMENT);
  tamatch_debiaser_free(d);
  tamatch_debiaser_free(nullptr);  // must be a safe no-op
}

TEST_CASE("runners over the C ABI") {
  const fs::path dir = fs::temp_directory_path() / "tamatch_capi_runner";
  fs::remove_all(dir);

  tamatch_config* cfg = tamatch_config_new();
  REQUIRE(tamatch_config_load_string(cfg,
                                     "[run]\nseed = 4\n[sim]\ntrajectories = "
                                     "6\nsteps = 8\nn_list = [2]\np1_grid = "
                                     "[0.2, 0.8]\n") == TAMATCH_OK);
  CHECK(tamatch_run_bias_sim(cfg, (dir / "sim").c_str()) == TAMATCH_OK);
  CHECK(fs::exists(dir / "sim" / "bias_sim.csv"));
  CHECK(fs::exists(dir / "sim" / "manifest.json"));

  CHECK(tamatch_run_bias_sim(cfg, nullptr) == TAMATCH_ERR_INVALID_ARGUMENT);

  // a config error surfaces as TAMATCH_ERR_CONFIG
  tamatch_config* bad = tamatch_config_new();
  REQUIRE(tamatch_config_load_string(bad, "[sim]\nbogus_key = 1\n") ==
          TAMATCH_OK);
  CHECK(tamatch_run_bias_sim(bad, (dir / "bad").c_str()) ==
        TAMATCH_ERR_CONFIG);
  tamatch_config_free(bad);

  // rank: missing file is IO, malformed is CONFIG
  CHECK(tamatch_run_rank((dir / "none.csv").c_str(), nullptr,
                         (dir / "rank").c_str()) == TAMATCH_ERR_IO);
  fs::create_directories(dir);
  std::ofstream(dir / "bad.csv") << "method,t1\nonly,1\n";
  CHECK(tamatch_run_rank((dir / "bad.csv").c_str(), nullptr,
                         (dir / "rank").c_str()) == TAMATCH_ERR_CONFIG);
  std::ofstream(dir / "ok.csv") << "method,t1\nA,1\nB,2\n";
  CHECK(tamatch_run_rank((dir / "ok.csv").c_str(), cfg,
                         (dir / "rank").c_str()) == TAMATCH_OK);
  CHECK(fs::exists(dir / "rank" / "rank.csv"));

  tamatch_config_free(cfg);
  fs::remove_all(dir);
}
