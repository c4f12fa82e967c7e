#include "spikemusic/spectral_model.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace spikemusic {

namespace {

[[noreturn]] void throw_domain(const char* what, double x, double floor) {
  std::ostringstream os;
  os << what << ": x = " << x << " is below the evaluation floor "
     << "lambda_plus + 1e-8 = " << floor;
  throw std::domain_error(os.str());
}

}  // namespace

void SpectralModel::require_above_edge(double x) const {
  const double floor = lambda_plus() + kEdgeMargin;
  if (!(x >= floor)) throw_domain("spectral model", x, floor);
}

double SpectralModel::companion_stieltjes(double x) const {
  const double c = aspect_ratio();
  return c * stieltjes(x) - (1.0 - c) / x;
}

double SpectralModel::companion_stieltjes_derivative(double x) const {
  const double c = aspect_ratio();
  return c * stieltjes_derivative(x) + (1.0 - c) / (x * x);
}

double SpectralModel::spike_function(double x) const {
  return x * stieltjes(x) * companion_stieltjes(x);
}

double SpectralModel::spike_function_derivative(double x) const {
  const double m = stieltjes(x);
  const double mp = stieltjes_derivative(x);
  const double mt = companion_stieltjes(x);
  const double mtp = companion_stieltjes_derivative(x);
  return m * mt + x * mp * mt + x * m * mtp;
}

double SpectralModel::zeta(double lambda) const {
  const double m = stieltjes(lambda);
  const double mt = companion_stieltjes(lambda);
  return spike_function_derivative(lambda) / (lambda * m * m * mt);
}

double SpectralModel::detection_threshold() const {
  return 1.0 / spike_function_at_edge();
}

bool SpectralModel::detectable(double omega_sq) const {
  return omega_sq > detection_threshold();
}

double SpectralModel::rho_bracket_upper(double omega_sq) const {
  // Doubling search; g is strictly decreasing to 0, so this terminates.
  double hi = lambda_plus() + std::max(1.0, lambda_plus());
  while (omega_sq * spike_function(hi) >= 1.0) hi *= 2.0;
  return hi;
}

double SpectralModel::solve_rho(double omega_sq) const {
  if (!(omega_sq > 0.0) || !std::isfinite(omega_sq)) {
    throw std::domain_error("solve_rho: omega_sq must be positive and finite");
  }
  if (!detectable(omega_sq)) {
    std::ostringstream os;
    os << "solve_rho: omega_sq = " << omega_sq
       << " is at or below the detection threshold " << detection_threshold();
    throw std::domain_error(os.str());
  }
  // f(x) = omega_sq * g(x) - 1 is strictly decreasing with f -> -1 at
  // infinity, so the root is unique where bracketed.
  const auto f = [&](double x) { return omega_sq * spike_function(x) - 1.0; };
  double lo = lambda_plus() + kEdgeMargin;
  if (f(lo) <= 0.0) {
    // Root sits between the edge and the evaluation floor: omega_sq is within
    // O(1e-4) of threshold and the root distance to the edge is below double
    // resolution. Saturate at the floor.
    return lo;
  }
  double hi = rho_bracket_upper(omega_sq);
  while (f(hi) >= 0.0) hi *= 2.0;

  while (hi - lo > 1e-8) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
  }

  // Newton polish; iterates stay inside [lo, hi] or fall back to bisection.
  double x = 0.5 * (lo + hi);
  for (int iter = 0; iter < 5; ++iter) {
    const double fx = f(x);
    if (std::abs(fx) < 1e-13) break;
    const double step = fx / (omega_sq * spike_function_derivative(x));
    double next = x - step;
    if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
    (f(next) > 0.0 ? lo : hi) = next;
    x = next;
  }
  return x;
}

double SpectralModel::subspace_bias(double omega_sq) const {
  return 1.0 / zeta(solve_rho(omega_sq));
}

double SpectralModel::asymptotic_variance(double omega_sq,
                                          double steering_scale) const {
  const double c = aspect_ratio();
  const double d = steering_scale;
  const double rho = solve_rho(omega_sq);
  const double m = stieltjes(rho);
  const double mp = stieltjes_derivative(rho);
  const double bracket = (mp - m * m) / (c * m * m) + omega_sq * (m + rho * mp);
  return 6.0 / (c * c * d * d) * bracket;
}

MarchenkoPasturModel::MarchenkoPasturModel(double aspect_ratio) {
  if (!(aspect_ratio > 0.0) || !(aspect_ratio <= 1.0)) {
    std::ostringstream os;
    os << "MarchenkoPasturModel: aspect ratio must lie in (0, 1], got "
       << aspect_ratio;
    throw std::invalid_argument(os.str());
  }
  c_ = aspect_ratio;
  const double root = std::sqrt(c_);
  lambda_minus_ = (1.0 - root) * (1.0 - root);
  lambda_plus_ = (1.0 + root) * (1.0 + root);
}

double MarchenkoPasturModel::stieltjes(double x) const {
  require_above_edge(x);
  const double u = 1.0 - c_ - x;
  // u^2 - 4cx factored through the edges; avoids cancellation near the bulk.
  const double s = std::sqrt((x - lambda_minus_) * (x - lambda_plus_));
  // Principal root of c x m^2 - (1-c-x) m + 1 = 0, written as 2/(u-s) so the
  // numerator never cancels (u < 0 and s > 0 above the edge).
  return 2.0 / (u - s);
}

double MarchenkoPasturModel::stieltjes_derivative(double x) const {
  require_above_edge(x);
  const double u = 1.0 - c_ - x;
  const double s = std::sqrt((x - lambda_minus_) * (x - lambda_plus_));
  const double s_prime = -(u + 2.0 * c_) / s;  // positive above the edge
  const double denom = u - s;
  return 2.0 * (1.0 + s_prime) / (denom * denom);
}

double MarchenkoPasturModel::spike_function_at_edge() const noexcept {
  return 1.0 / std::sqrt(c_);
}

double MarchenkoPasturModel::rho_closed_form(double omega_sq) const {
  if (!detectable(omega_sq)) {
    std::ostringstream os;
    os << "rho_closed_form: omega_sq = " << omega_sq
       << " is at or below the detection threshold " << detection_threshold();
    throw std::domain_error(os.str());
  }
  return (omega_sq + 1.0) * (omega_sq + c_) / omega_sq;
}

double MarchenkoPasturModel::rho_bracket_upper(double omega_sq) const {
  return 2.0 * rho_closed_form(omega_sq);
}

double MarchenkoPasturModel::variance_closed_form(double omega_sq,
                                                  double steering_scale) const {
  if (!detectable(omega_sq)) {
    throw std::domain_error(
        "variance_closed_form: omega_sq is at or below the detection "
        "threshold");
  }
  const double d = steering_scale;
  return 6.0 / (c_ * c_ * d * d) * (omega_sq + 1.0) /
         (omega_sq * omega_sq - c_);
}

double MarchenkoPasturModel::crlb_high_snr(double omega_sq,
                                           double steering_scale) const {
  if (!(omega_sq > 0.0)) {
    throw std::domain_error("crlb_high_snr: omega_sq must be positive");
  }
  const double d = steering_scale;
  return 6.0 / (c_ * c_ * d * d * omega_sq);
}

SpikePrediction predict_spike(const MarchenkoPasturModel& model,
                              double omega_sq, double steering_scale) {
  SpikePrediction out;
  out.omega_sq = omega_sq;
  out.detectable = model.detectable(omega_sq);
  out.crlb_sigma_sq = model.crlb_high_snr(omega_sq, steering_scale);
  if (out.detectable) {
    out.rho = model.solve_rho(omega_sq);
    out.subspace_bias = 1.0 / model.zeta(out.rho);
    out.sigma_sq = model.asymptotic_variance(omega_sq, steering_scale);
  } else {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.rho = nan;
    out.subspace_bias = nan;
    out.sigma_sq = nan;
  }
  return out;
}

}  // namespace spikemusic
