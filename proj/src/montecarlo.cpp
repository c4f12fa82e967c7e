#include "spikemusic/montecarlo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "spikemusic/parallel.hpp"
#include "spikemusic/rng.hpp"
#include "spikemusic/spectral_model.hpp"

namespace spikemusic {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_double(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", v);
  return buffer;
}

const char* const kCsvHeader =
    "N,n,c,D,snr_db,source_index,true_angle,trials,outlier_rate,bias,"
    "empirical_var,theoretical_var,crlb";

}  // namespace

double association_window(const ArrayConfig& config) {
  const int r = config.num_sources();
  if (r < 1) {
    throw std::invalid_argument("association_window: need at least one source");
  }
  double window = std::numbers::pi / (2.0 * config.steering_scale * r);
  if (r > 1) {
    std::vector<double> sorted = config.angles;
    std::sort(sorted.begin(), sorted.end());
    for (int k = 1; k < r; ++k) {
      window = std::min(window, 0.5 * (sorted[k] - sorted[k - 1]));
    }
  }
  return window;
}

TrialResult run_trial(const Scenario& scenario, const PhiGrid& grid,
                      std::uint64_t seed) {
  const ArrayConfig& config = scenario.config;
  config.validate();
  const int r = config.num_sources();
  if (r < 1) {
    throw std::invalid_argument("run_trial: need at least one source");
  }

  const Observation obs = assemble_observation(config, seed);
  const EigenSystem eigs = eigendecompose(obs.sigma);
  const Spectrum spectrum =
      spike_music_spectrum(eigs, config, grid, scenario.detect_margin);
  const std::vector<Peak> peaks = find_peaks(spectrum, r);

  TrialResult result;
  result.seed = seed;
  result.degenerate = spectrum.degenerate;
  result.estimates.assign(r, kNaN);
  result.errors.assign(r, kNaN);
  result.outlier.assign(r, 1);
  const int kept = std::min(r + 1, config.num_sensors);
  result.top_eigenvalues.assign(eigs.values.data(),
                                eigs.values.data() + kept);

  // Greedy nearest-pair association inside the window; each peak serves at
  // most one source.
  const double window = association_window(config);
  std::vector<bool> peak_used(peaks.size(), false);
  std::vector<bool> source_done(r, false);
  for (std::size_t round = 0; round < peaks.size(); ++round) {
    int best_source = -1;
    int best_peak = -1;
    double best_distance = window;
    for (int k = 0; k < r; ++k) {
      if (source_done[k]) continue;
      for (std::size_t p = 0; p < peaks.size(); ++p) {
        if (peak_used[p]) continue;
        const double distance = std::abs(peaks[p].angle - config.angles[k]);
        if (distance <= best_distance) {
          best_distance = distance;
          best_source = k;
          best_peak = static_cast<int>(p);
        }
      }
    }
    if (best_source < 0) break;
    source_done[best_source] = true;
    peak_used[best_peak] = true;
    result.estimates[best_source] = peaks[best_peak].angle;
    result.errors[best_source] =
        peaks[best_peak].angle - config.angles[best_source];
    result.outlier[best_source] = 0;
  }
  return result;
}

SweepResult run_sweep(const std::vector<Scenario>& scenarios,
                      std::uint64_t master_seed, int workers) {
  if (scenarios.empty()) {
    throw std::invalid_argument("run_sweep: no scenarios");
  }
  const auto start = std::chrono::steady_clock::now();
  SweepResult result;
  result.master_seed = master_seed;

  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    const Scenario& scenario = scenarios[s];
    scenario.config.validate();
    if (scenario.trials < 1) {
      throw std::invalid_argument("run_sweep: trials must be >= 1");
    }
    const int r = scenario.config.num_sources();
    const int n = scenario.config.num_snapshots;
    const PhiGrid grid =
        PhiGrid::uniform(scenario.config.num_sensors,
                         scenario.config.steering_scale, scenario.grid_size);

    std::vector<TrialResult> trials(scenario.trials);
    parallel_for(scenario.trials, workers, [&](int t) {
      trials[t] = run_trial(scenario, grid,
                            derive_seed(master_seed, s, t));
    });

    const MarchenkoPasturModel finite_model(scenario.config.aspect_ratio());
    for (int k = 0; k < r; ++k) {
      SweepRow row;
      row.num_sensors = scenario.config.num_sensors;
      row.num_snapshots = n;
      row.aspect_ratio = scenario.config.aspect_ratio();
      row.steering_scale = scenario.config.steering_scale;
      row.snr_db = 10.0 * std::log10(scenario.config.powers[k]);
      row.source_index = k;
      row.true_angle = scenario.config.angles[k];
      row.trials = scenario.trials;

      // Two-pass moments in trial order: identical for every worker count.
      int valid = 0;
      double error_sum = 0.0;
      double eigen_sum = 0.0;
      for (const TrialResult& trial : trials) {
        eigen_sum += trial.top_eigenvalues[k];
        if (!trial.outlier[k]) {
          ++valid;
          error_sum += trial.errors[k];
        }
      }
      row.outlier_rate =
          static_cast<double>(scenario.trials - valid) / scenario.trials;
      row.bias = valid > 0 ? error_sum / valid : kNaN;
      double centered = 0.0;
      for (const TrialResult& trial : trials) {
        if (!trial.outlier[k]) {
          const double d = trial.errors[k] - row.bias;
          centered += d * d;
        }
      }
      row.empirical_var = valid > 1 ? centered / (valid - 1) : kNaN;
      row.eigenvalue_mean = eigen_sum / scenario.trials;

      const SpikePrediction pred =
          predict_spike(finite_model, scenario.config.powers[k],
                        scenario.config.steering_scale);
      const double n_cubed = static_cast<double>(n) * n * n;
      row.theoretical_var = pred.sigma_sq / n_cubed;
      row.crlb = pred.crlb_sigma_sq / n_cubed;
      row.eigenvalue_prediction = pred.rho;
      result.rows.push_back(row);
    }
  }

  result.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return result;
}

void aggregate_and_emit(const SweepResult& result, const std::string& stem) {
  if (result.rows.empty()) {
    throw std::invalid_argument("aggregate_and_emit: empty sweep");
  }
  const std::string csv_path = stem + ".csv";
  std::ofstream csv(csv_path, std::ios::trunc);
  if (!csv) {
    throw std::runtime_error("aggregate_and_emit: cannot open " + csv_path);
  }
  csv << kCsvHeader << "\n";
  for (const SweepRow& row : result.rows) {
    csv << row.num_sensors << ',' << row.num_snapshots << ','
        << format_double(row.aspect_ratio) << ','
        << format_double(row.steering_scale) << ','
        << format_double(row.snr_db) << ',' << row.source_index << ','
        << format_double(row.true_angle) << ',' << row.trials << ','
        << format_double(row.outlier_rate) << ',' << format_double(row.bias)
        << ',' << format_double(row.empirical_var) << ','
        << format_double(row.theoretical_var) << ','
        << format_double(row.crlb) << "\n";
  }
  csv.flush();
  if (!csv) {
    throw std::runtime_error("aggregate_and_emit: write failed on " +
                             csv_path);
  }

  nlohmann::ordered_json doc;
  doc["master_seed"] = result.master_seed;
  doc["elapsed_seconds"] = result.elapsed_seconds;
  doc["rows"] = nlohmann::ordered_json::array();
  for (const SweepRow& row : result.rows) {
    nlohmann::ordered_json j;
    j["N"] = row.num_sensors;
    j["n"] = row.num_snapshots;
    j["c"] = row.aspect_ratio;
    j["D"] = row.steering_scale;
    j["snr_db"] = row.snr_db;
    j["source_index"] = row.source_index;
    j["true_angle"] = row.true_angle;
    j["trials"] = row.trials;
    j["outlier_rate"] = row.outlier_rate;
    j["bias"] = row.bias;
    j["empirical_var"] = row.empirical_var;
    j["theoretical_var"] = row.theoretical_var;
    j["crlb"] = row.crlb;
    doc["rows"].push_back(std::move(j));
  }
  const std::string json_path = stem + ".json";
  std::ofstream json_file(json_path, std::ios::trunc);
  if (!json_file) {
    throw std::runtime_error("aggregate_and_emit: cannot open " + json_path);
  }
  json_file << doc.dump(2) << "\n";
  json_file.flush();
  if (!json_file) {
    throw std::runtime_error("aggregate_and_emit: write failed on " +
                             json_path);
  }
}

std::vector<SweepRow> read_sweep_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("read_sweep_csv: cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw std::runtime_error("read_sweep_csv: bad header in " + path);
  }
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 13) {
      throw std::runtime_error("read_sweep_csv: bad row in " + path);
    }
    SweepRow row;
    row.num_sensors = std::stoi(fields[0]);
    row.num_snapshots = std::stoi(fields[1]);
    row.aspect_ratio = std::stod(fields[2]);
    row.steering_scale = std::stod(fields[3]);
    row.snr_db = std::stod(fields[4]);
    row.source_index = std::stoi(fields[5]);
    row.true_angle = std::stod(fields[6]);
    row.trials = std::stoi(fields[7]);
    row.outlier_rate = std::stod(fields[8]);
    row.bias = std::stod(fields[9]);
    row.empirical_var = std::stod(fields[10]);
    row.theoretical_var = std::stod(fields[11]);
    row.crlb = std::stod(fields[12]);
    rows.push_back(row);
  }
  return rows;
}

ResolventProbe qf_fluctuation_experiment(int num_sensors, int num_snapshots,
                                         double rho, int trials,
                                         std::uint64_t master_seed,
                                         int workers) {
  if (num_sensors < 2 || num_snapshots < num_sensors) {
    throw std::invalid_argument(
        "qf_fluctuation_experiment: need 2 <= N <= n");
  }
  if (trials < 2) {
    throw std::invalid_argument("qf_fluctuation_experiment: trials >= 2");
  }
  const MarchenkoPasturModel model(static_cast<double>(num_sensors) /
                                   num_snapshots);
  if (!(rho > model.lambda_plus() + SpectralModel::kEdgeMargin)) {
    throw std::invalid_argument(
        "qf_fluctuation_experiment: rho must sit above the bulk edge");
  }

  // Deterministic probes: orthonormalized steering pair and a flat n-vector.
  const Eigen::VectorXcd w = steering_vector(num_sensors, 1.0, 0.5);
  Eigen::VectorXcd w_perp = steering_vector(num_sensors, 1.0, 1.0);
  w_perp -= (w.adjoint() * w_perp)(0, 0) * w;
  w_perp /= w_perp.norm();
  const Eigen::VectorXcd w_tilde =
      Eigen::VectorXcd::Constant(num_snapshots,
                                 1.0 / std::sqrt(double(num_snapshots)));

  std::vector<std::complex<double>> projection(trials), mixed(trials);
  parallel_for(trials, workers, [&](int t) {
    const Eigen::MatrixXcd x =
        generate_noise(num_sensors, num_snapshots,
                       derive_seed(master_seed, 0, t));
    const Eigen::MatrixXcd gram = x * x.adjoint();

    // Q(rho) = (XX* - rho I)^-1 through the positive definite rho I - XX*.
    Eigen::MatrixXcd shifted = -gram;
    shifted.diagonal().array() += rho;
    const Eigen::LLT<Eigen::MatrixXcd> llt(shifted);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error(
          "qf_fluctuation_experiment: rho is inside the sample spectrum");
    }
    const Eigen::VectorXcd q_w_perp = -llt.solve(w_perp);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> values_only(
        gram, Eigen::EigenvaluesOnly);
    double alpha = 0.0;
    for (int i = 0; i < num_sensors; ++i) {
      alpha += 1.0 / (values_only.eigenvalues()[i] - rho);
    }
    alpha /= num_sensors;
    const std::complex<double> overlap = (w.adjoint() * w_perp)(0, 0);
    projection[t] = std::sqrt(double(num_sensors)) *
                    ((w.adjoint() * q_w_perp)(0, 0) - alpha * overlap);

    // X Q_tilde = Q X (exact: (XX* - rho I) X = X (X*X - rho I)), so the
    // mixed form reuses the N x N factorization instead of an n x n one.
    const Eigen::VectorXcd q_x_w_tilde = -llt.solve(x * w_tilde);
    mixed[t] = std::sqrt(double(num_snapshots)) *
               (w.adjoint() * q_x_w_tilde)(0, 0);
  });

  ResolventProbe probe;
  probe.num_sensors = num_sensors;
  probe.num_snapshots = num_snapshots;
  probe.trials = trials;
  probe.rho = rho;
  probe.master_seed = master_seed;

  std::complex<double> sum_p(0.0, 0.0), sum_m(0.0, 0.0);
  for (int t = 0; t < trials; ++t) {
    sum_p += projection[t];
    sum_m += mixed[t];
  }
  probe.mean_projection = sum_p / double(trials);
  probe.mean_mixed = sum_m / double(trials);

  double var_p = 0.0, var_m = 0.0;
  std::complex<double> cov(0.0, 0.0);
  for (int t = 0; t < trials; ++t) {
    const std::complex<double> dp = projection[t] - probe.mean_projection;
    const std::complex<double> dm = mixed[t] - probe.mean_mixed;
    var_p += std::norm(dp);
    var_m += std::norm(dm);
    cov += dp * std::conj(dm);
  }
  probe.var_projection = var_p / (trials - 1);
  probe.var_mixed = var_m / (trials - 1);
  probe.cross_correlation =
      std::abs(cov / (trials - 1.0)) /
      std::sqrt(probe.var_projection * probe.var_mixed);

  const double m = model.stieltjes(rho);
  const double mp = model.stieltjes_derivative(rho);
  probe.predicted_var_projection = mp - m * m;
  probe.predicted_var_mixed = m + rho * mp;
  return probe;
}

}  // namespace spikemusic
