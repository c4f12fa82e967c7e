#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "spikemusic/montecarlo.hpp"
#include "spikemusic/rng.hpp"
#include "spikemusic/spectral_model.hpp"

using namespace spikemusic;

namespace {

constexpr double kPi = std::numbers::pi;

Scenario two_source_scenario(int num_sensors, double omega_sq, int trials) {
  Scenario scenario;
  scenario.config.num_sensors = num_sensors;
  scenario.config.num_snapshots = 2 * num_sensors;
  scenario.config.angles = {0.5, 1.0};
  scenario.config.powers = {omega_sq, omega_sq};
  scenario.trials = trials;
  return scenario;
}

std::string temp_stem(const char* tag) {
  return (std::filesystem::temp_directory_path() /
          (std::string("spikemusic_test_") + tag))
      .string();
}

bool same_value(double a, double b) {
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("association window combines domain and gap limits") {
  ArrayConfig config;
  config.num_sensors = 20;
  config.num_snapshots = 40;
  config.angles = {0.5};
  config.powers = {10.0};
  CHECK(std::abs(association_window(config) - kPi / 2.0) < 1e-15);

  config.angles = {0.5, 1.0};
  config.powers = {10.0, 10.0};
  CHECK(std::abs(association_window(config) - 0.25) < 1e-15);

  config.steering_scale = 2.0;
  config.angles = {0.3, 1.4};
  CHECK(std::abs(association_window(config) - kPi / 8.0) < 1e-15);
}

TEST_CASE("noiseless trial recovers the angle to machine-level accuracy") {
  Scenario scenario;
  scenario.config.num_sensors = 20;
  scenario.config.num_snapshots = 40;
  scenario.config.angles = {0.5};
  scenario.config.powers = {10.0};
  scenario.config.noise_scale = 0.0;
  scenario.trials = 1;
  const PhiGrid grid = PhiGrid::uniform(20, 1.0);
  const TrialResult trial = run_trial(scenario, grid, 1);
  REQUIRE(trial.estimates.size() == 1);
  CHECK_FALSE(trial.degenerate);
  CHECK(trial.outlier[0] == 0);
  CHECK(std::abs(trial.errors[0]) < 1e-6);
  CHECK(std::abs(trial.top_eigenvalues[0] - 10.0) < 1e-10);
  CHECK(trial.top_eigenvalues.size() == 2);
}

TEST_CASE("trials at 10 dB associate both sources without outliers") {
  Scenario scenario = two_source_scenario(20, 10.0, 1);
  const PhiGrid grid = PhiGrid::uniform(20, 1.0);
  for (int t = 0; t < 100; ++t) {
    const TrialResult trial =
        run_trial(scenario, grid, derive_seed(321, 0, t));
    CHECK_FALSE(trial.degenerate);
    REQUIRE(trial.errors.size() == 2);
    for (int k = 0; k < 2; ++k) {
      CHECK(trial.outlier[k] == 0);
      CHECK(std::abs(trial.errors[k]) < 0.05);
    }
    CHECK(trial.top_eigenvalues.size() == 3);
    CHECK(trial.top_eigenvalues[0] >= trial.top_eigenvalues[1]);
  }
}

TEST_CASE("trials just above threshold mostly fail detection") {
  // omega_sq = 0.75 vs threshold sqrt(0.5) ~ 0.707: the limit 2.917 sits
  // below the detection cut (1+sqrt(c_n))^2 + 0.25 ~ 3.164.
  Scenario scenario = two_source_scenario(20, 0.75, 1);
  const PhiGrid grid = PhiGrid::uniform(20, 1.0);
  int outliers = 0;
  for (int t = 0; t < 50; ++t) {
    const TrialResult trial =
        run_trial(scenario, grid, derive_seed(322, 0, t));
    outliers += trial.outlier[0] + trial.outlier[1];
  }
  CHECK(outliers > 50);
}

TEST_CASE("sweep rows carry predictions and exact bookkeeping") {
  std::vector<Scenario> scenarios = {two_source_scenario(20, 10.0, 120)};
  const SweepResult sweep = run_sweep(scenarios, 9001, 0);
  REQUIRE(sweep.rows.size() == 2);
  CHECK(sweep.master_seed == 9001);
  CHECK(sweep.elapsed_seconds > 0.0);

  const MarchenkoPasturModel model(0.5);
  const double n_cubed = 40.0 * 40.0 * 40.0;
  for (int k = 0; k < 2; ++k) {
    const SweepRow& row = sweep.rows[k];
    CHECK(row.num_sensors == 20);
    CHECK(row.num_snapshots == 40);
    CHECK(row.aspect_ratio == 0.5);
    CHECK(row.source_index == k);
    CHECK(row.true_angle == scenarios[0].config.angles[k]);
    CHECK(row.trials == 120);
    CHECK(std::abs(row.snr_db - 10.0) < 1e-12);
    CHECK(std::abs(row.theoretical_var -
                   model.asymptotic_variance(10.0, 1.0) / n_cubed) < 1e-18);
    CHECK(std::abs(row.crlb - model.crlb_high_snr(10.0, 1.0) / n_cubed) <
          1e-18);
    CHECK(std::abs(row.eigenvalue_prediction - 11.55) < 1e-9);
    CHECK(row.outlier_rate == 0.0);
    CHECK(row.empirical_var > 0.0);
  }
  // Eigenvalue means track the finite-N spike powers: at N = 20 the steering
  // correlation splits the two nominal 10s into the eigenvalues of
  // Omega B*B Omega, and each mean lambda_hat_k approaches rho of its own
  // effective power.
  {
    const Eigen::MatrixXcd b = steering_matrix(scenarios[0].config);
    Eigen::MatrixXcd weighted = 10.0 * (b.adjoint() * b);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> powers(weighted);
    for (int k = 0; k < 2; ++k) {
      const double effective = powers.eigenvalues()(1 - k);
      const double rho = model.rho_closed_form(effective);
      CHECK(std::abs(sweep.rows[k].eigenvalue_mean - rho) < 0.05 * rho);
    }
  }
  CHECK(sweep.rows[0].empirical_var != sweep.rows[1].empirical_var);
}

TEST_CASE("sweep validates its inputs") {
  CHECK_THROWS_AS(run_sweep({}, 1, 0), std::invalid_argument);
  Scenario bad = two_source_scenario(20, 10.0, 0);
  CHECK_THROWS_AS(run_sweep({bad}, 1, 0), std::invalid_argument);
}

TEST_CASE("sweeps are identical for every worker count") {
  std::vector<Scenario> scenarios = {two_source_scenario(15, 10.0, 60),
                                     two_source_scenario(20, 10.0, 60)};
  const SweepResult serial = run_sweep(scenarios, 777, 1);
  const SweepResult parallel = run_sweep(scenarios, 777, 4);
  REQUIRE(serial.rows.size() == parallel.rows.size());
  for (std::size_t i = 0; i < serial.rows.size(); ++i) {
    CHECK(serial.rows[i].bias == parallel.rows[i].bias);
    CHECK(serial.rows[i].empirical_var == parallel.rows[i].empirical_var);
    CHECK(serial.rows[i].outlier_rate == parallel.rows[i].outlier_rate);
    CHECK(serial.rows[i].eigenvalue_mean == parallel.rows[i].eigenvalue_mean);
  }

  const std::string stem_a = temp_stem("workers1");
  const std::string stem_b = temp_stem("workers4");
  aggregate_and_emit(serial, stem_a);
  aggregate_and_emit(parallel, stem_b);
  CHECK(file_bytes(stem_a + ".csv") == file_bytes(stem_b + ".csv"));
  std::remove((stem_a + ".csv").c_str());
  std::remove((stem_a + ".json").c_str());
  std::remove((stem_b + ".csv").c_str());
  std::remove((stem_b + ".json").c_str());
}

TEST_CASE("emitted CSV and JSON round-trip exactly") {
  std::vector<Scenario> scenarios = {two_source_scenario(15, 10.0, 40)};
  const SweepResult sweep = run_sweep(scenarios, 31337, 0);
  const std::string stem = temp_stem("roundtrip");
  aggregate_and_emit(sweep, stem);

  const std::vector<SweepRow> parsed = read_sweep_csv(stem + ".csv");
  REQUIRE(parsed.size() == sweep.rows.size());
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    CHECK(parsed[i].num_sensors == sweep.rows[i].num_sensors);
    CHECK(parsed[i].num_snapshots == sweep.rows[i].num_snapshots);
    CHECK(same_value(parsed[i].aspect_ratio, sweep.rows[i].aspect_ratio));
    CHECK(same_value(parsed[i].steering_scale, sweep.rows[i].steering_scale));
    CHECK(same_value(parsed[i].snr_db, sweep.rows[i].snr_db));
    CHECK(parsed[i].source_index == sweep.rows[i].source_index);
    CHECK(same_value(parsed[i].true_angle, sweep.rows[i].true_angle));
    CHECK(parsed[i].trials == sweep.rows[i].trials);
    CHECK(same_value(parsed[i].outlier_rate, sweep.rows[i].outlier_rate));
    CHECK(same_value(parsed[i].bias, sweep.rows[i].bias));
    CHECK(same_value(parsed[i].empirical_var, sweep.rows[i].empirical_var));
    CHECK(same_value(parsed[i].theoretical_var, sweep.rows[i].theoretical_var));
    CHECK(same_value(parsed[i].crlb, sweep.rows[i].crlb));
  }

  std::ifstream json_in(stem + ".json");
  REQUIRE(json_in.good());
  const nlohmann::json doc = nlohmann::json::parse(json_in);
  CHECK(doc["master_seed"] == 31337);
  REQUIRE(doc["rows"].size() == sweep.rows.size());
  CHECK(doc["rows"][0]["N"] == 15);
  CHECK(doc["rows"][0]["empirical_var"] ==
        doctest::Approx(sweep.rows[0].empirical_var).epsilon(1e-15));

  std::remove((stem + ".csv").c_str());
  std::remove((stem + ".json").c_str());
}

TEST_CASE("emission failures carry the path") {
  SweepResult empty;
  CHECK_THROWS_AS(aggregate_and_emit(empty, temp_stem("empty")),
                  std::invalid_argument);

  std::vector<Scenario> scenarios = {two_source_scenario(15, 10.0, 5)};
  const SweepResult sweep = run_sweep(scenarios, 5, 0);
  try {
    aggregate_and_emit(sweep, "/nonexistent_dir_zzz/out");
    FAIL_CHECK("expected a throw for an unwritable path");
  } catch (const std::runtime_error& err) {
    CHECK(std::string(err.what()).find("/nonexistent_dir_zzz/out") !=
          std::string::npos);
  }
  CHECK_THROWS_AS(read_sweep_csv("/nonexistent_dir_zzz/in.csv"),
                  std::runtime_error);
}

TEST_CASE("variance scaling law holds across N at fixed aspect ratio") {
  // Var x n^3 is approximately constant (the variance coefficient depends
  // only on c, omega_sq, D).
  std::vector<Scenario> scenarios = {two_source_scenario(20, 10.0, 2000),
                                     two_source_scenario(35, 10.0, 2000),
                                     two_source_scenario(50, 10.0, 2000)};
  const SweepResult sweep = run_sweep(scenarios, 60601, 0);
  double lo = 1e300, hi = 0.0;
  for (const SweepRow& row : sweep.rows) {
    const double n = row.num_snapshots;
    const double scaled = row.empirical_var * n * n * n;
    lo = std::min(lo, scaled);
    hi = std::max(hi, scaled);
    CHECK(row.outlier_rate < 0.01);
  }
  CHECK(hi / lo < 1.25);
}

TEST_CASE("resolvent fluctuation probe matches its limits loosely") {
  const ResolventProbe probe =
      qf_fluctuation_experiment(50, 100, 11.55, 400, 2718, 0);
  CHECK(probe.predicted_var_projection > 0.0);
  CHECK(probe.predicted_var_mixed > 0.0);
  CHECK(std::abs(probe.predicted_var_projection - 484.0 / 10618839.0) < 1e-12);
  CHECK(std::abs(probe.predicted_var_mixed - 2.0 / 199.0) < 1e-12);
  CHECK(std::abs(probe.var_projection - probe.predicted_var_projection) <
        0.5 * probe.predicted_var_projection);
  CHECK(std::abs(probe.var_mixed - probe.predicted_var_mixed) <
        0.5 * probe.predicted_var_mixed);
  CHECK(probe.cross_correlation < 0.25);
  CHECK(std::abs(probe.mean_projection) <
        3.0 * std::sqrt(probe.var_projection / probe.trials));

  const ResolventProbe again =
      qf_fluctuation_experiment(50, 100, 11.55, 400, 2718, 2);
  CHECK(again.var_projection == probe.var_projection);
  CHECK(again.var_mixed == probe.var_mixed);

  CHECK_THROWS_AS(qf_fluctuation_experiment(50, 100, 2.0, 400, 1, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(qf_fluctuation_experiment(50, 40, 11.55, 400, 1, 0),
                  std::invalid_argument);
}
