#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <vector>

namespace spikemusic {

/// Scenario geometry and source structure for one observation
/// Sigma = X + P, where X is N x n Gaussian noise and P = B Omega F* is the
/// deterministic rank-r signal component.
struct ArrayConfig {
  /// Antenna count N (rows).
  int num_sensors = 0;
  /// Snapshot count n (columns), n >= N so the aspect ratio stays in (0, 1].
  int num_snapshots = 0;
  /// Steering constant D > 0; the angle domain is [0, pi/D].
  double steering_scale = 1.0;
  /// Source angles, strictly inside (0, pi/D) and pairwise distinct.
  std::vector<double> angles;
  /// Source powers omega_k^2, positive and sorted non-increasing, matching
  /// angles element-wise.
  std::vector<double> powers;
  /// Multiplies the noise block; 1 for experiments, 0 for noiseless
  /// diagnostics.
  double noise_scale = 1.0;

  int num_sources() const noexcept { return static_cast<int>(angles.size()); }
  double aspect_ratio() const noexcept {
    return static_cast<double>(num_sensors) / num_snapshots;
  }
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// One realization of the observation; sigma == noise + signal exactly.
struct Observation {
  Eigen::MatrixXcd signal;  // P, N x n, rank num_sources
  Eigen::MatrixXcd noise;   // scaled X, N x n
  Eigen::MatrixXcd sigma;   // X + P
  std::uint64_t seed = 0;
};

/// Unit-norm steering vector b(phi)[l] = exp(-i D l phi) / sqrt(N),
/// l = 0..N-1. Requires N >= 1, D > 0, phi in [0, pi/D].
Eigen::VectorXcd steering_vector(int num_sensors, double steering_scale,
                                 double phi);

/// Element-wise derivative d/dphi b(phi); norm grows like N D / sqrt(3).
Eigen::VectorXcd steering_derivative(int num_sensors, double steering_scale,
                                     double phi);

/// Second derivative d^2/dphi^2 b(phi); consumed by tests only.
Eigen::VectorXcd steering_second_derivative(int num_sensors,
                                            double steering_scale, double phi);

/// Normalized Dirichlet kernel q_N(t) = (1/N) sum_{k=0}^{N-1} exp(-2 pi i k t)
/// for t in [-1/2, 1/2], evaluated through the stable closed form
/// exp(-i pi (N-1) t) sin(N pi t) / (N sin(pi t)) with a direct-summation
/// fallback near t = 0. Steering inner products reduce to this kernel.
std::complex<double> dirichlet_kernel(int length, double t);

/// N x r matrix of steering columns b(phi_1) .. b(phi_r).
Eigen::MatrixXcd steering_matrix(const ArrayConfig& config);

/// Deterministic n x r signal matrix S = F diag(omega_1..omega_r) with F the
/// first r columns of the unitary n-point DFT, so S* S equals
/// diag(powers) to rounding. Only the noise varies across trials.
Eigen::MatrixXcd build_signal_matrix(const ArrayConfig& config);

/// N x n noise draw: every entry has independent real and imaginary parts of
/// variance 1/(2n). Entries are filled row by row, real part then imaginary
/// part, from a GaussianSampler seeded with `seed`.
Eigen::MatrixXcd generate_noise(int num_sensors, int num_snapshots,
                                std::uint64_t seed);

/// Builds P = B S*, draws X, and returns the assembled observation.
Observation assemble_observation(const ArrayConfig& config, std::uint64_t seed);

/// Debug export: writes `<stem>_sigma.bin`, `<stem>_signal.bin` and
/// `<stem>_noise.bin`, each row-major little-endian float64 with
/// interleaved re/im (entry (i, j) occupies the 16 bytes starting at
/// 16 * (i * n + j)), plus `<stem>_meta.json` recording the layout,
/// dimensions and seed. Returns the four paths written; throws
/// std::runtime_error naming the path on I/O failure and on hosts whose
/// native byte order is not little-endian.
std::vector<std::string> dump_observation(const Observation& observation,
                                          const std::string& stem);

}  // namespace spikemusic
