#include "spikemusic/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace spikemusic {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kGolden = 0.6180339887498949;  // 1/phi
constexpr double kRefineTol = 1e-10;            // rad

// Golden-section maximization of f on [lo, hi]; f unimodal on the bracket.
template <class F>
double golden_section_max(const F& f, double lo, double hi) {
  double a = lo, b = hi;
  double x1 = b - kGolden * (b - a);
  double x2 = a + kGolden * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > kRefineTol) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kGolden * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kGolden * (b - a);
      f1 = f(x1);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

EigenSystem eigendecompose(const Eigen::MatrixXcd& sigma) {
  if (sigma.rows() < 1 || sigma.cols() < sigma.rows()) {
    throw std::invalid_argument(
        "eigendecompose: sigma must be N x n with 1 <= N <= n");
  }
  const Eigen::MatrixXcd gram = sigma * sigma.adjoint();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(gram);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("eigendecompose: eigensolver did not converge");
  }

  const int n = static_cast<int>(sigma.rows());
  EigenSystem out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();

  // Phase convention: rotate each eigenvector so its largest-modulus entry is
  // real positive. Downstream quantities are phase-invariant; this pin makes
  // runs bit-reproducible.
  for (int k = 0; k < n; ++k) {
    Eigen::Index pivot = 0;
    out.vectors.col(k).cwiseAbs().maxCoeff(&pivot);
    const std::complex<double> top = out.vectors(pivot, k);
    const double modulus = std::abs(top);
    if (modulus > 0.0) out.vectors.col(k) *= std::conj(top) / modulus;
  }
  return out;
}

std::vector<int> detect_spikes(const EigenSystem& eigs,
                               const ArrayConfig& config,
                               double detect_margin) {
  if (!(detect_margin >= 0.0)) {
    throw std::invalid_argument("detect_spikes: margin must be >= 0");
  }
  const double root = std::sqrt(config.aspect_ratio());
  const double edge = (1.0 + root) * (1.0 + root);
  const double threshold = edge + std::max(detect_margin, 1e-6);
  std::vector<int> detected;
  const int limit = std::min<int>(config.num_sources(),
                                  static_cast<int>(eigs.values.size()));
  for (int k = 0; k < limit; ++k) {
    if (eigs.values[k] > threshold) detected.push_back(k);
  }
  return detected;
}

int PhiGrid::minimum_size(int num_sensors) {
  return std::max(1024, 8 * num_sensors);
}

PhiGrid PhiGrid::uniform(int num_sensors, double steering_scale, int size) {
  if (num_sensors < 1 || !(steering_scale > 0.0)) {
    throw std::invalid_argument("PhiGrid: bad geometry");
  }
  const int floor = minimum_size(num_sensors);
  if (size == 0) size = floor;
  if (size < floor) {
    std::ostringstream os;
    os << "PhiGrid: size " << size << " is below the minimum " << floor
       << " = max(1024, 8 * num_sensors)";
    throw std::invalid_argument(os.str());
  }
  PhiGrid grid;
  grid.phis.resize(size);
  grid.steering.resize(num_sensors, size);
  const double domain = kPi / steering_scale;
  for (int g = 0; g < size; ++g) {
    const double phi = domain * g / (size - 1);
    grid.phis[g] = phi;
    grid.steering.col(g) = steering_vector(num_sensors, steering_scale, phi);
  }
  return grid;
}

double LocalizationFunction::operator()(double phi) const {
  const Eigen::VectorXcd b = steering_vector(
      static_cast<int>(vectors.rows()), steering_scale, phi);
  return (b.adjoint() * vectors).cwiseAbs2().cwiseProduct(
             weights.transpose()).sum();
}

namespace {

Spectrum evaluate_spectrum(const EigenSystem& eigs, const ArrayConfig& config,
                           const PhiGrid& grid, Spectrum::Method method,
                           const std::vector<int>& selected,
                           const Eigen::VectorXd& weights) {
  if (grid.steering.rows() != config.num_sensors) {
    throw std::invalid_argument("spectrum: grid geometry mismatch");
  }
  Spectrum out;
  out.method = method;
  out.phis = grid.phis;
  out.localization.steering_scale = config.steering_scale;
  out.localization.weights = weights;
  out.localization.vectors.resize(config.num_sensors,
                                  static_cast<int>(selected.size()));
  for (std::size_t k = 0; k < selected.size(); ++k) {
    out.localization.vectors.col(static_cast<int>(k)) =
        eigs.vectors.col(selected[k]);
  }
  if (selected.empty()) {
    out.degenerate = true;
    out.values = Eigen::VectorXd::Zero(grid.size());
    return out;
  }
  const Eigen::MatrixXd abs2 =
      (grid.steering.adjoint() * out.localization.vectors).cwiseAbs2();
  out.values = abs2 * weights;
  return out;
}

}  // namespace

Spectrum classical_music_spectrum(const EigenSystem& eigs,
                                  const ArrayConfig& config,
                                  const PhiGrid& grid) {
  config.validate();
  const int r = config.num_sources();
  if (r < 1) {
    throw std::invalid_argument(
        "classical_music_spectrum: need at least one source");
  }
  std::vector<int> selected(r);
  for (int k = 0; k < r; ++k) selected[k] = k;
  return evaluate_spectrum(eigs, config, grid, Spectrum::Method::classical,
                           selected, Eigen::VectorXd::Ones(r));
}

Spectrum spike_music_spectrum(const EigenSystem& eigs,
                              const ArrayConfig& config, const PhiGrid& grid,
                              double detect_margin) {
  config.validate();
  if (config.num_sources() < 1) {
    throw std::invalid_argument(
        "spike_music_spectrum: need at least one source");
  }
  const std::vector<int> detected =
      detect_spikes(eigs, config, detect_margin);
  const MarchenkoPasturModel finite_model(config.aspect_ratio());
  Eigen::VectorXd weights(static_cast<int>(detected.size()));
  for (std::size_t k = 0; k < detected.size(); ++k) {
    weights[static_cast<int>(k)] = finite_model.zeta(eigs.values[detected[k]]);
  }
  return evaluate_spectrum(eigs, config, grid, Spectrum::Method::spike,
                           detected, weights);
}

std::vector<Peak> find_peaks(const Spectrum& spectrum, int count) {
  if (count < 0) throw std::invalid_argument("find_peaks: count must be >= 0");
  const int size = static_cast<int>(spectrum.phis.size());
  const int sensors = static_cast<int>(spectrum.localization.vectors.rows());
  if (size < PhiGrid::minimum_size(sensors)) {
    throw std::invalid_argument(
        "find_peaks: grid below the minimum max(1024, 8 * num_sensors)");
  }
  if (spectrum.degenerate || count == 0) return {};

  // Strict local maxima of the samples; boundary points compare one-sided.
  std::vector<int> maxima;
  for (int g = 0; g < size; ++g) {
    const bool left = (g == 0) || spectrum.values[g] > spectrum.values[g - 1];
    const bool right =
        (g == size - 1) || spectrum.values[g] > spectrum.values[g + 1];
    if (left && right) maxima.push_back(g);
  }
  std::sort(maxima.begin(), maxima.end(), [&](int a, int b) {
    if (spectrum.values[a] != spectrum.values[b]) {
      return spectrum.values[a] > spectrum.values[b];
    }
    return a < b;
  });
  if (static_cast<int>(maxima.size()) > count) maxima.resize(count);

  const double domain_hi = spectrum.phis[size - 1];
  const double step = domain_hi / (size - 1);
  std::vector<Peak> peaks;
  peaks.reserve(maxima.size());
  for (int g : maxima) {
    const double lo = std::max(0.0, spectrum.phis[g] - step);
    const double hi = std::min(domain_hi, spectrum.phis[g] + step);
    Peak peak;
    peak.angle = golden_section_max(spectrum.localization, lo, hi);
    peak.height = spectrum.localization(peak.angle);
    peaks.push_back(peak);
  }
  std::sort(peaks.begin(), peaks.end(),
            [](const Peak& a, const Peak& b) { return a.angle < b.angle; });
  return peaks;
}

}  // namespace spikemusic
