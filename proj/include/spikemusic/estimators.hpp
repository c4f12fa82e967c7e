#pragma once

#include <Eigen/Dense>
#include <vector>

#include "spikemusic/signal_model.hpp"
#include "spikemusic/spectral_model.hpp"

namespace spikemusic {

/// Default detection margin above the finite-sample bulk edge (absolute).
inline constexpr double kDefaultDetectMargin = 0.25;

/// Full spectral decomposition of Sigma Sigma*: eigenvalues sorted
/// non-increasing, eigenvectors orthonormal with the phase convention that
/// each vector's largest-modulus entry is real positive (bit-reproducible).
struct EigenSystem {
  Eigen::VectorXd values;
  Eigen::MatrixXcd vectors;
};

/// Hermitian eigendecomposition of sigma * sigma.adjoint().
EigenSystem eigendecompose(const Eigen::MatrixXcd& sigma);

/// Indices k (0-based, k < num_sources) whose eigenvalue clears the
/// finite-sample bulk edge: lambda_k > (1 + sqrt(N/n))^2 + margin, with
/// margin = max(detect_margin, 1e-6) so near-edge eigenvalues are excluded
/// rather than clamped.
std::vector<int> detect_spikes(const EigenSystem& eigs,
                               const ArrayConfig& config,
                               double detect_margin = kDefaultDetectMargin);

/// Uniform angle grid over [0, pi/D] with precomputed steering columns so
/// repeated spectra over the same geometry amortize the exponentials.
struct PhiGrid {
  Eigen::VectorXd phis;       // G grid angles, ascending
  Eigen::MatrixXcd steering;  // N x G, column g = b(phis[g])

  /// size 0 selects the default max(1024, 8N); explicit sizes below that are
  /// rejected (the main lobe of |b* b|^2 needs ~8 samples not to be missed).
  static PhiGrid uniform(int num_sensors, double steering_scale,
                         int size = 0);
  static int minimum_size(int num_sensors);
  int size() const noexcept { return static_cast<int>(phis.size()); }
};

/// Continuous localization function chi(phi) = sum_k weights[k]
/// |b(phi)* vectors.col(k)|^2, used by peak refinement between grid points.
struct LocalizationFunction {
  Eigen::MatrixXcd vectors;  // N x K
  Eigen::VectorXd weights;   // K
  double steering_scale = 1.0;
  double operator()(double phi) const;
};

/// Sampled localization function plus everything needed to refine its peaks.
struct Spectrum {
  enum class Method { classical, spike };
  Method method = Method::classical;
  /// Spike spectrum with no detected eigenvalue: values are all zero and no
  /// estimate should be read off.
  bool degenerate = false;
  Eigen::VectorXd phis;
  Eigen::VectorXd values;
  LocalizationFunction localization;
};

/// Classical MUSIC localization: chi(phi) = b(phi)* Pi_hat b(phi) with
/// Pi_hat the projector onto the top-r eigenvectors. Values lie in [0, 1].
Spectrum classical_music_spectrum(const EigenSystem& eigs,
                                  const ArrayConfig& config,
                                  const PhiGrid& grid);

/// Spike MUSIC localization: chi_hat(phi) = sum over detected k of
/// zeta_n(lambda_k) |b(phi)* u_k|^2, where zeta_n uses the finite-sample
/// ratio c_n = N/n. Detected means clearing the detect_spikes margin.
Spectrum spike_music_spectrum(const EigenSystem& eigs,
                              const ArrayConfig& config, const PhiGrid& grid,
                              double detect_margin = kDefaultDetectMargin);

struct Peak {
  double angle = 0.0;
  double height = 0.0;
};

/// The `count` largest strict local maxima of the sampled values, each
/// refined by golden-section search of the continuous localization function
/// within one grid step, to 1e-10 rad. Returned sorted by angle ascending;
/// fewer than `count` peaks are returned when the samples do not offer them
/// (the caller decides how to treat that).
std::vector<Peak> find_peaks(const Spectrum& spectrum, int count);

}  // namespace spikemusic
