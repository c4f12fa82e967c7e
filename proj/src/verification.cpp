#include "spikemusic/verification.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdarg>
#include <cstdio>
#include <numbers>
#include <vector>

#include "spikemusic/estimators.hpp"
#include "spikemusic/montecarlo.hpp"
#include "spikemusic/parallel.hpp"
#include "spikemusic/rng.hpp"
#include "spikemusic/signal_model.hpp"
#include "spikemusic/spectral_model.hpp"

namespace spikemusic {
namespace {

std::string text(const char* format, ...) {
  char buffer[256];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buffer, sizeof buffer, format, args);
  va_end(args);
  return buffer;
}

CheckResult check(const std::string& name, bool pass,
                  const std::string& detail) {
  return CheckResult{name, pass, detail};
}

/// The shared evaluation grid: 20 aspect ratios spanning (0, 1] and 20
/// powers per ratio, log-spaced from just above the detection threshold
/// sqrt(c) to deep in the high-SNR regime.
std::vector<double> aspect_grid() {
  std::vector<double> cs;
  for (int i = 1; i <= 20; ++i) cs.push_back(i / 20.0);
  return cs;
}

std::vector<double> power_grid(double c) {
  std::vector<double> omegas;
  for (int j = 0; j < 20; ++j) {
    const double t = 1.05 * std::pow(100.0 / 1.05, j / 19.0);
    omegas.push_back(std::sqrt(c) * t);
  }
  return omegas;
}

// ---------------------------------------------------------------- fast ----

CheckResult check_stieltjes_anchors() {
  const MarchenkoPasturModel half(0.5);
  const MarchenkoPasturModel square(1.0);
  double dev = 0.0;
  dev = std::max(dev, std::abs(half.stieltjes(11.55) + 2.0 / 21.0));
  dev = std::max(dev, std::abs(half.companion_stieltjes(11.55) + 1.0 / 11.0));
  dev = std::max(dev, std::abs(half.spike_function(11.55) - 0.1));
  dev = std::max(dev,
                 std::abs(square.stieltjes(5.0) - (std::sqrt(5.0) - 5.0) / 10.0));
  return check("stieltjes-anchors", dev < 1e-12,
               text("max anchor deviation %.2e (tol 1e-12)", dev));
}

CheckResult check_spike_inverse_identity() {
  double dev = 0.0;
  for (double c : aspect_grid()) {
    const MarchenkoPasturModel model(c);
    for (double omega_sq : power_grid(c)) {
      const double rho = model.solve_rho(omega_sq);
      dev = std::max(dev,
                     std::abs(omega_sq * model.spike_function(rho) - 1.0));
    }
  }
  return check("spike-inverse-identity", dev < 1e-10,
               text("max |omega^2 g(rho) - 1| = %.2e on 20x20 grid "
                    "(tol 1e-10)",
                    dev));
}

CheckResult check_rho_closed_form() {
  double dev = 0.0;
  for (double c : aspect_grid()) {
    const MarchenkoPasturModel model(c);
    for (double omega_sq : power_grid(c)) {
      const double solved = model.solve_rho(omega_sq);
      const double closed = model.rho_closed_form(omega_sq);
      dev = std::max(dev, std::abs(solved / closed - 1.0));
    }
  }
  return check("rho-closed-form", dev < 1e-9,
               text("max relative gap %.2e on 20x20 grid (tol 1e-9)", dev));
}

CheckResult check_variance_closed_form() {
  double dev = 0.0;
  for (double c : aspect_grid()) {
    const MarchenkoPasturModel model(c);
    for (double omega_sq : power_grid(c)) {
      const double general = model.asymptotic_variance(omega_sq, 1.0);
      const double closed = model.variance_closed_form(omega_sq, 1.0);
      dev = std::max(dev, std::abs(general / closed - 1.0));
    }
  }
  return check("variance-closed-form", dev < 1e-6,
               text("max relative gap %.2e on 20x20 grid (tol 1e-6)", dev));
}

CheckResult check_bias_identity() {
  double dev = 0.0;
  for (double c : aspect_grid()) {
    const MarchenkoPasturModel model(c);
    for (double omega_sq : power_grid(c)) {
      const double bias = model.subspace_bias(omega_sq);
      const double w4 = omega_sq * omega_sq;
      const double closed = (w4 - c) / (w4 + c * omega_sq);
      dev = std::max(dev, std::abs(bias - closed));
    }
  }
  return check("bias-identity", dev < 1e-10,
               text("max |1/zeta(rho) - closed form| = %.2e (tol 1e-10)",
                    dev));
}

CheckResult check_point_predictions() {
  const MarchenkoPasturModel model(0.5);
  const SpikePrediction p = predict_spike(model, 10.0, 1.0);
  double dev = 0.0;
  dev = std::max(dev, std::abs(p.rho - 11.55));
  dev = std::max(dev, std::abs(p.subspace_bias - 0.9476190));
  dev = std::max(dev, std::abs(p.sigma_sq - 2.6532663));
  dev = std::max(dev, std::abs(p.crlb_sigma_sq - 2.4));
  const MarchenkoPasturModel square(1.0);
  dev = std::max(dev, std::abs(square.solve_rho(2.0) - 4.5));
  const double weak = std::pow(10.0, -3.0 / 10.0);  // -3 dB < sqrt(0.5)
  const bool undetectable = !predict_spike(model, weak, 1.0).detectable;
  return check("point-predictions", dev < 1e-5 && undetectable,
               text("max deviation %.2e (tol 1e-5); -3 dB undetectable: %s",
                    dev, undetectable ? "yes" : "no"));
}

CheckResult check_edge_and_threshold() {
  double dev = 0.0;
  double continuity = 0.0;
  bool thresholds = true;
  for (double c : aspect_grid()) {
    const MarchenkoPasturModel model(c);
    dev = std::max(dev,
                   std::abs(model.spike_function_at_edge() - 1 / std::sqrt(c)));
    const double near = model.spike_function(model.lambda_plus() + 1e-7);
    continuity = std::max(continuity,
                          std::abs(near * std::sqrt(c) - 1.0));
    thresholds = thresholds && model.detectable(std::sqrt(c) * (1 + 1e-6)) &&
                 !model.detectable(std::sqrt(c) * (1 - 1e-6));
  }
  return check("edge-and-threshold",
               dev < 1e-12 && continuity < 0.01 && thresholds,
               text("edge value gap %.2e (tol 1e-12); g near edge within "
                    "%.2e of 1/sqrt(c); thresholds sharp: %s",
                    dev, continuity, thresholds ? "yes" : "no"));
}

CheckResult check_steering_derivative_limits() {
  const int n_sensors = 2000;
  const int n_snapshots = 4000;
  const double c = 0.5;
  const double scale = 1.0;
  const Eigen::VectorXcd b = steering_vector(n_sensors, scale, 0.7);
  const Eigen::VectorXcd db = steering_derivative(n_sensors, scale, 0.7);
  const Eigen::VectorXcd d2b =
      steering_second_derivative(n_sensors, scale, 0.7);
  const double slope = db.norm() / n_snapshots;
  const double slope_limit = c * scale / std::sqrt(3.0);
  const double curvature =
      (b.adjoint() * d2b)(0, 0).real() / (double(n_snapshots) * n_snapshots);
  const double curvature_limit = -c * c * scale * scale / 3.0;
  const double dev = std::max(std::abs(slope / slope_limit - 1.0),
                              std::abs(curvature / curvature_limit - 1.0));
  return check("steering-derivative-limits", dev < 0.02,
               text("|b'|/n and n^-2 Re(b* b'') within %.2e of cD/sqrt(3), "
                    "-c^2 D^2/3 at N=2000 (tol 0.02)",
                    dev));
}

CheckResult check_dirichlet_and_isometry() {
  double kernel_dev = 0.0;
  const int length = 1000;
  for (double d : {0.5, 1.0, 2.0}) {
    const std::complex<double> measured = dirichlet_kernel(length, d / length);
    const std::complex<double> limit =
        std::polar(std::sin(std::numbers::pi * d) / (std::numbers::pi * d),
                   -std::numbers::pi * d);
    kernel_dev = std::max(kernel_dev, std::abs(measured - limit));
  }

  ArrayConfig config;
  config.steering_scale = 1.0;
  config.angles = {0.5, 1.0};
  config.powers = {1.0, 1.0};
  std::vector<double> gaps;
  for (int n_sensors : {100, 200, 500}) {
    config.num_sensors = n_sensors;
    config.num_snapshots = 2 * n_sensors;
    const Eigen::MatrixXcd b = steering_matrix(config);
    const Eigen::MatrixXcd gap =
        b.adjoint() * b - Eigen::MatrixXcd::Identity(2, 2);
    gaps.push_back(gap.jacobiSvd().singularValues()(0));
  }
  const bool decreasing = gaps[0] > gaps[1] && gaps[1] > gaps[2];
  const bool small = gaps[2] < 0.02;
  return check("dirichlet-and-isometry",
               kernel_dev < 1e-2 && decreasing && small,
               text("kernel limit gap %.2e at N=1000 (tol 1e-2); "
                    "|B*B - I| = %.5f / %.5f / %.5f over N=100/200/500",
                    kernel_dev, gaps[0], gaps[1], gaps[2]));
}

// ---------------------------------------------------------------- full ----

/// Shared 100-seed pass at N=200, n=400, one 10 dB source at 0.5: top
/// eigenvalue, squared steering overlap with the top eigenvector, and the
/// weighted localization value at the true angle.
void spike_convergence_checks(std::vector<CheckResult>& results,
                              int workers) {
  constexpr int kSeeds = 100;
  ArrayConfig config;
  config.num_sensors = 200;
  config.num_snapshots = 400;
  config.angles = {0.5};
  config.powers = {10.0};
  const PhiGrid grid = PhiGrid::uniform(200, 1.0);
  const Eigen::VectorXcd b = steering_vector(200, 1.0, 0.5);

  std::vector<double> lambda(kSeeds), proj(kSeeds), chi(kSeeds);
  parallel_for(kSeeds, workers, [&](int t) {
    const Observation obs =
        assemble_observation(config, derive_seed(0x5eed0003, 0, t));
    const EigenSystem eigs = eigendecompose(obs.sigma);
    lambda[t] = eigs.values[0];
    proj[t] = std::norm((b.adjoint() * eigs.vectors.col(0))(0, 0));
    chi[t] = spike_music_spectrum(eigs, config, grid).localization(0.5);
  });
  double mean_lambda = 0.0, mean_proj = 0.0, mean_chi = 0.0;
  for (int t = 0; t < kSeeds; ++t) {
    mean_lambda += lambda[t];
    mean_proj += proj[t];
    mean_chi += chi[t];
  }
  mean_lambda /= kSeeds;
  mean_proj /= kSeeds;
  mean_chi /= kSeeds;

  const double rho = 11.55;
  const double bias = 199.0 / 210.0;
  results.push_back(check(
      "eigenvalue-convergence", std::abs(mean_lambda / rho - 1.0) < 0.02,
      text("mean top eigenvalue %.4f vs rho %.4f over %d seeds at N=200 "
           "(tol 2%%)",
           mean_lambda, rho, kSeeds)));
  results.push_back(check(
      "subspace-bias", std::abs(mean_proj / bias - 1.0) < 0.02,
      text("mean |b* u1|^2 = %.5f vs 1/zeta(rho) = %.5f (tol 2%%)",
           mean_proj, bias)));
  results.push_back(check(
      "localization-consistency", std::abs(mean_chi - 1.0) < 0.02,
      text("mean weighted localization at the true angle %.5f vs 1 "
           "(tol 2%%)",
           mean_chi)));
}

CheckResult check_noise_edge_convergence(int workers) {
  constexpr int kSeeds = 50;
  std::vector<double> lambda(kSeeds);
  parallel_for(kSeeds, workers, [&](int t) {
    const Eigen::MatrixXcd x =
        generate_noise(200, 400, derive_seed(0x5eed0004, 0, t));
    lambda[t] = eigendecompose(x).values[0];
  });
  double mean = 0.0;
  for (double v : lambda) mean += v;
  mean /= kSeeds;
  const double edge = MarchenkoPasturModel(0.5).lambda_plus();
  return check("noise-edge-convergence", std::abs(mean / edge - 1.0) < 0.05,
               text("mean noise-only top eigenvalue %.4f vs bulk edge %.4f "
                    "(tol 5%%)",
                    mean, edge));
}

CheckResult check_variance_scaling(int workers) {
  std::vector<Scenario> scenarios;
  for (int n_sensors : {20, 40}) {
    Scenario scenario;
    scenario.config.num_sensors = n_sensors;
    scenario.config.num_snapshots = 2 * n_sensors;
    scenario.config.angles = {0.5, 1.0};
    scenario.config.powers = {10.0, 10.0};
    scenario.trials = 1500;
    scenarios.push_back(scenario);
  }
  const SweepResult result = run_sweep(scenarios, 0x5eed0005, workers);
  double dev = 0.0;
  double outliers = 0.0;
  for (const SweepRow& row : result.rows) {
    dev = std::max(dev, std::abs(row.empirical_var / row.theoretical_var - 1.0));
    outliers = std::max(outliers, row.outlier_rate);
  }
  return check("variance-scaling", dev < 0.25 && outliers < 0.01,
               text("empirical vs predicted variance within %.3f at "
                    "N=20,40 x 1500 trials (tol 0.25); outlier rate %.4f",
                    dev, outliers));
}

CheckResult check_resolvent_fluctuations(int workers) {
  const ResolventProbe probe =
      qf_fluctuation_experiment(100, 200, 11.55, 600, 0x5eed0006, workers);
  const double dev_proj =
      std::abs(probe.var_projection / probe.predicted_var_projection - 1.0);
  const double dev_mixed =
      std::abs(probe.var_mixed / probe.predicted_var_mixed - 1.0);
  const bool pass =
      dev_proj < 0.30 && dev_mixed < 0.20 && probe.cross_correlation < 0.15;
  return check("resolvent-fluctuations", pass,
               text("projection variance off by %.3f (tol 0.30), mixed by "
                    "%.3f (tol 0.20), |corr| = %.3f (tol 0.15) at N=100 x "
                    "600 trials",
                    dev_proj, dev_mixed, probe.cross_correlation));
}

}  // namespace

std::vector<CheckResult> run_verification(VerifyLevel level, int workers) {
  std::vector<CheckResult> results;
  results.push_back(check_stieltjes_anchors());
  results.push_back(check_spike_inverse_identity());
  results.push_back(check_rho_closed_form());
  results.push_back(check_variance_closed_form());
  results.push_back(check_bias_identity());
  results.push_back(check_point_predictions());
  results.push_back(check_edge_and_threshold());
  results.push_back(check_steering_derivative_limits());
  results.push_back(check_dirichlet_and_isometry());
  if (level == VerifyLevel::full) {
    spike_convergence_checks(results, workers);
    results.push_back(check_noise_edge_convergence(workers));
    results.push_back(check_variance_scaling(workers));
    results.push_back(check_resolvent_fluctuations(workers));
  }
  return results;
}

bool all_passed(const std::vector<CheckResult>& results) {
  for (const CheckResult& result : results) {
    if (!result.pass) return false;
  }
  return true;
}

}  // namespace spikemusic
