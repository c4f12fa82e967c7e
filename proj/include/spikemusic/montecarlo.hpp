#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "spikemusic/estimators.hpp"
#include "spikemusic/signal_model.hpp"

namespace spikemusic {

/// One sweep point: a geometry plus trial budget and estimator knobs.
struct Scenario {
  ArrayConfig config;
  int trials = 0;
  double detect_margin = kDefaultDetectMargin;
  /// Peak-search grid size; 0 selects max(1024, 8N).
  int grid_size = 0;
};

/// Outcome of a single trial. Sources with no associated peak (spectrum
/// degenerate, fewer peaks than sources, or nearest peak outside the
/// association window) carry NaN estimates and a set outlier flag.
struct TrialResult {
  std::vector<double> estimates;  // per source, NaN when missing
  std::vector<double> errors;     // estimate - truth, NaN when outlier
  std::vector<std::uint8_t> outlier;
  std::vector<double> top_eigenvalues;  // first min(r+1, N) of lambda_hat
  bool degenerate = false;
  std::uint64_t seed = 0;
};

/// Association window: min(pi/(2 D r), half the smallest angle gap).
double association_window(const ArrayConfig& config);

/// Runs one trial: assemble the observation from `seed`, eigendecompose,
/// build the spike spectrum, search r peaks, and associate them to the true
/// angles by greedy nearest match inside the association window.
TrialResult run_trial(const Scenario& scenario, const PhiGrid& grid,
                      std::uint64_t seed);

/// Aggregate for one scenario x source pair; one CSV row.
struct SweepRow {
  int num_sensors = 0;
  int num_snapshots = 0;
  double aspect_ratio = 0.0;
  double steering_scale = 1.0;
  double snr_db = 0.0;  // 10 log10(power) of this source
  int source_index = 0;
  double true_angle = 0.0;
  int trials = 0;
  double outlier_rate = 0.0;
  double bias = 0.0;           // mean error over non-outlier trials
  double empirical_var = 0.0;  // sample variance of the error around its mean
  double theoretical_var = 0.0;  // sigma_sq / n^3
  double crlb = 0.0;             // high-SNR bound / n^3
  // In-memory extras (not part of the CSV schema):
  double eigenvalue_mean = 0.0;        // mean of lambda_hat_k
  double eigenvalue_prediction = 0.0;  // rho_k
};

struct SweepResult {
  std::uint64_t master_seed = 0;
  double elapsed_seconds = 0.0;
  std::vector<SweepRow> rows;
};

/// Runs every scenario for its trial budget. Per-trial seeds are
/// derive_seed(master_seed, scenario_index, trial_index) and reductions run
/// in trial order, so the result is identical for every worker count.
/// workers <= 0 selects the hardware concurrency.
SweepResult run_sweep(const std::vector<Scenario>& scenarios,
                      std::uint64_t master_seed, int workers = 0);

/// Writes `stem`.csv (header + one row per scenario x source, floats with 17
/// significant digits) and `stem`.json (the same fields plus master_seed and
/// elapsed_seconds). Overwrites existing files; throws std::runtime_error
/// naming the path on I/O failure and std::invalid_argument on empty input.
void aggregate_and_emit(const SweepResult& result, const std::string& stem);

/// Re-reads a CSV produced by aggregate_and_emit (for round-trip checks and
/// downstream consumers).
std::vector<SweepRow> read_sweep_csv(const std::string& path);

/// Fluctuations of resolvent quadratic forms on pure noise, the Gaussian
/// building blocks behind the asymptotic variance. Probes are
/// deterministic: w = b(0.5), w' = b(1.0) orthonormalized against w (both
/// with D = 1), w_tilde = the constant unit n-vector. Per trial with
/// Q = (XX* - rho I)^-1 and Q_tilde = (X*X - rho I)^-1 (both reached through
/// one N x N Cholesky solve, using X Q_tilde = Q X), records
///   projection family: sqrt(N) (w* Q w' - alpha w* w'), alpha = tr(Q)/N,
///   mixed family:      sqrt(n) w* X Q_tilde w_tilde,
/// whose limiting complex variances are m'(rho) - m(rho)^2 and
/// m(rho) + rho m'(rho); the families are asymptotically uncorrelated.
struct ResolventProbe {
  int num_sensors = 0;
  int num_snapshots = 0;
  int trials = 0;
  double rho = 0.0;
  std::uint64_t master_seed = 0;
  std::complex<double> mean_projection;
  std::complex<double> mean_mixed;
  double var_projection = 0.0;
  double var_mixed = 0.0;
  double predicted_var_projection = 0.0;
  double predicted_var_mixed = 0.0;
  double cross_correlation = 0.0;  // |corr|, expected -> 0
};

ResolventProbe qf_fluctuation_experiment(int num_sensors, int num_snapshots,
                                         double rho, int trials,
                                         std::uint64_t master_seed,
                                         int workers = 0);

}  // namespace spikemusic
