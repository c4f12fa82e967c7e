/// Command line front end: closed-form predictions, single-shot spectra,
/// Monte Carlo sweeps and the invariant battery, all driven by the JSON
/// experiment configs and deterministic given (config, seed, workers).

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "spikemusic/estimators.hpp"
#include "spikemusic/montecarlo.hpp"
#include "spikemusic/run_config.hpp"
#include "spikemusic/signal_model.hpp"
#include "spikemusic/spectral_model.hpp"
#include "spikemusic/verification.hpp"

namespace {

using namespace spikemusic;

/// Shared flags; subcommands fall through to these.
struct GlobalArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string output_dir = ".";
  int workers = 0;
};

RunConfig require_config(const GlobalArgs& args) {
  if (args.config_path.empty()) {
    throw CLI::RequiredError("--config");
  }
  return load_run_config(args.config_path);
}

std::string output_path(const GlobalArgs& args, const std::string& name) {
  std::filesystem::create_directories(args.output_dir);
  return (std::filesystem::path(args.output_dir) / name).string();
}

std::string db_of(double power) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.7g dB", 10.0 * std::log10(power));
  return buffer;
}

int cmd_predict(double aspect_ratio, double omega_sq, double steering_scale) {
  const MarchenkoPasturModel model(aspect_ratio);
  const SpikePrediction p = predict_spike(model, omega_sq, steering_scale);
  std::printf("aspect ratio          %.8g\n", model.aspect_ratio());
  std::printf("bulk support          [%.8g, %.8g]\n", model.lambda_minus(),
              model.lambda_plus());
  std::printf("detection threshold   omega^2 > %.8g (%s)\n",
              model.detection_threshold(),
              db_of(model.detection_threshold()).c_str());
  std::printf("source power          omega^2 = %.8g (%s)\n", p.omega_sq,
              db_of(p.omega_sq).c_str());
  if (!p.detectable) {
    std::printf("undetectable          power at or below the threshold; no "
                "isolated eigenvalue\n");
    return 0;
  }
  std::printf("isolated eigenvalue   %.8g\n", p.rho);
  std::printf("subspace bias         %.8g\n", p.subspace_bias);
  std::printf("variance constant     %.8g  -> Var(phi_hat) ~ %.8g / n^3\n",
              p.sigma_sq, p.sigma_sq);
  std::printf("high-SNR bound        %.8g / n^3\n", p.crlb_sigma_sq);
  return 0;
}

int cmd_spectrum(const GlobalArgs& args, int scenario_index,
                 const std::string& method, const std::string& stem,
                 bool dump) {
  const RunConfig config = require_config(args);
  const std::vector<Scenario> scenarios = config.to_scenarios();
  if (scenario_index < 0 ||
      scenario_index >= static_cast<int>(scenarios.size())) {
    throw std::invalid_argument(
        "scenario index " + std::to_string(scenario_index) +
        " out of range; config has " + std::to_string(scenarios.size()) +
        " scenarios");
  }
  const Scenario& scenario = scenarios[scenario_index];
  const std::uint64_t seed =
      args.seed_given ? args.seed : config.master_seed;

  const Observation obs = assemble_observation(scenario.config, seed);
  const EigenSystem eigs = eigendecompose(obs.sigma);
  const PhiGrid grid =
      PhiGrid::uniform(scenario.config.num_sensors,
                       scenario.config.steering_scale, scenario.grid_size);
  const Spectrum spectrum =
      method == "classical"
          ? classical_music_spectrum(eigs, scenario.config, grid)
          : spike_music_spectrum(eigs, scenario.config, grid,
                                 scenario.detect_margin);

  std::printf("method                %s\n", method.c_str());
  std::printf("num_sensors           %d\n", scenario.config.num_sensors);
  std::printf("num_snapshots         %d\n", scenario.config.num_snapshots);
  std::printf("seed                  %llu\n",
              static_cast<unsigned long long>(seed));
  if (spectrum.degenerate) {
    std::printf("degenerate            no eigenvalue cleared the detection "
                "edge; spectrum is identically zero\n");
  }

  const std::string csv_path = output_path(args, stem + "_" + method + ".csv");
  std::ofstream csv(csv_path, std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write " + csv_path);
  csv << "phi,value\n";
  for (int g = 0; g < spectrum.phis.size(); ++g) {
    char line[80];
    std::snprintf(line, sizeof line, "%.17g,%.17g\n", spectrum.phis[g],
                  spectrum.values[g]);
    csv << line;
  }
  if (!csv) throw std::runtime_error("write failed: " + csv_path);

  const std::vector<Peak> peaks =
      find_peaks(spectrum, scenario.config.num_sources());
  std::printf("peaks                 %zu of %d requested\n", peaks.size(),
              scenario.config.num_sources());
  for (std::size_t k = 0; k < peaks.size(); ++k) {
    double best_angle = scenario.config.angles[0];
    for (double angle : scenario.config.angles) {
      if (std::abs(peaks[k].angle - angle) <
          std::abs(peaks[k].angle - best_angle)) {
        best_angle = angle;
      }
    }
    std::printf("peak %zu                phi = %.10g, value = %.6g, nearest "
                "source %.10g (error %+.3e)\n",
                k, peaks[k].angle, peaks[k].height, best_angle,
                peaks[k].angle - best_angle);
  }
  std::printf("wrote                 %s (%d rows)\n", csv_path.c_str(),
              grid.size());

  if (dump) {
    const std::vector<std::string> paths =
        dump_observation(obs, output_path(args, stem + "_observation"));
    for (const std::string& path : paths) {
      std::printf("wrote                 %s\n", path.c_str());
    }
  }
  return 0;
}

int cmd_sweep(const GlobalArgs& args, std::string stem) {
  const RunConfig config = require_config(args);
  const std::uint64_t seed =
      args.seed_given ? args.seed : config.master_seed;
  if (stem.empty()) {
    stem = std::filesystem::path(args.config_path).stem().string();
  }

  const SweepResult result =
      run_sweep(config.to_scenarios(), seed, args.workers);
  aggregate_and_emit(result, output_path(args, stem));

  std::printf("%5s %5s %8s %4s %9s %13s %13s %7s\n", "N", "n", "snr_db",
              "src", "outliers", "empirical", "predicted", "ratio");
  for (const SweepRow& row : result.rows) {
    std::printf("%5d %5d %8.2f %4d %9.4f %13.6e %13.6e %7.3f\n",
                row.num_sensors, row.num_snapshots, row.snr_db,
                row.source_index, row.outlier_rate, row.empirical_var,
                row.theoretical_var, row.empirical_var / row.theoretical_var);
  }
  std::printf("elapsed               %.2f s\n", result.elapsed_seconds);
  std::printf("wrote                 %s.csv\n", output_path(args, stem).c_str());
  std::printf("wrote                 %s.json\n",
              output_path(args, stem).c_str());
  return 0;
}

int cmd_verify(const std::string& level, int workers) {
  const VerifyLevel parsed =
      level == "full" ? VerifyLevel::full : VerifyLevel::fast;
  const std::vector<CheckResult> results = run_verification(parsed, workers);
  int passed = 0;
  for (const CheckResult& result : results) {
    std::printf("%s %-28s %s\n", result.pass ? "PASS" : "FAIL",
                result.name.c_str(), result.detail.c_str());
    passed += result.pass ? 1 : 0;
  }
  std::printf("%d of %zu checks passed (level %s)\n", passed, results.size(),
              level.c_str());
  return all_passed(results) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Spike MUSIC: angle-of-arrival estimation under a fixed-rank "
      "perturbation of a large Gaussian noise matrix"};
  app.require_subcommand(1);

  GlobalArgs args;
  app.add_option("--config", args.config_path,
                 "JSON experiment description");
  CLI::Option* seed_opt =
      app.add_option("--seed", args.seed,
                     "Override the config master_seed (64-bit unsigned)");
  app.add_option("--output", args.output_dir,
                 "Directory for emitted files (default '.')")
      ->envname("SPIKEMUSIC_OUTPUT_DIR");
  app.add_option("--workers", args.workers,
                 "Worker threads; 0 selects the hardware concurrency");

  int exit_code = 0;

  CLI::App* predict = app.add_subcommand(
      "predict", "Closed-form spike predictions for one source power");
  predict->fallthrough();
  double aspect_ratio = 0.5;
  double snr_db = 0.0;
  double omega_sq = 0.0;
  double steering_scale = 1.0;
  predict->add_option("--c", aspect_ratio, "Aspect ratio N/n in (0, 1]")
      ->required();
  CLI::Option* snr_opt =
      predict->add_option("--snr-db", snr_db, "Source power in dB");
  CLI::Option* omega_opt =
      predict->add_option("--omega-sq", omega_sq, "Source power omega^2");
  snr_opt->excludes(omega_opt);
  omega_opt->excludes(snr_opt);
  predict->add_option("--D", steering_scale, "Steering scale (default 1)");
  predict->callback([&] {
    if (snr_opt->count() == 0 && omega_opt->count() == 0) {
      throw CLI::RequiredError("--snr-db or --omega-sq");
    }
    const double power =
        snr_opt->count() > 0 ? std::pow(10.0, snr_db / 10.0) : omega_sq;
    exit_code = cmd_predict(aspect_ratio, power, steering_scale);
  });

  CLI::App* spectrum = app.add_subcommand(
      "spectrum", "One pseudo-spectrum realization from a config scenario");
  spectrum->fallthrough();
  int scenario_index = 0;
  std::string method = "spike";
  std::string spectrum_stem = "spectrum";
  bool dump = false;
  spectrum->add_option("--scenario", scenario_index,
                       "Scenario index inside the config (default 0)");
  spectrum->add_option("--method", method, "spike or classical")
      ->check(CLI::IsMember({"spike", "classical"}));
  spectrum->add_option("--stem", spectrum_stem,
                       "Output file stem (default 'spectrum')");
  spectrum->add_flag("--dump-observation", dump,
                     "Also write the observation matrices as binary dumps");
  spectrum->callback([&] {
    args.seed_given = seed_opt->count() > 0;
    exit_code =
        cmd_spectrum(args, scenario_index, method, spectrum_stem, dump);
  });

  CLI::App* sweep = app.add_subcommand(
      "sweep", "Monte Carlo sweep over the config scenarios; emits CSV+JSON");
  sweep->fallthrough();
  std::string sweep_stem;
  sweep->add_option("--stem", sweep_stem,
                    "Output file stem (default: config file name)");
  sweep->callback([&] {
    args.seed_given = seed_opt->count() > 0;
    exit_code = cmd_sweep(args, sweep_stem);
  });

  CLI::App* verify = app.add_subcommand(
      "verify", "Run the invariant battery; exit 0 iff every check passes");
  verify->fallthrough();
  std::string level = "fast";
  verify->add_option("--level", level, "fast (analytic, < 5 s) or full "
                                       "(adds Monte Carlo checks)")
      ->check(CLI::IsMember({"fast", "full"}));
  verify->callback([&] { exit_code = cmd_verify(level, args.workers); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& error) {
    return app.exit(error);
  } catch (const std::exception& error) {
    std::fprintf(stderr, "error: %s\n", error.what());
    return 1;
  }
  return exit_code;
}
