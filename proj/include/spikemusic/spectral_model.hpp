#pragma once

#include <optional>

namespace spikemusic {

/// Limiting spectral description of the noise-only sample covariance model on
/// the real axis to the right of the bulk. Everything downstream (spike
/// weights, variance predictions) is written against this interface; exactly
/// one concrete law ships, the Marchenko-Pastur law below.
///
/// Notation: c is the antenna/snapshot aspect ratio in (0, 1], m(x) the
/// Stieltjes transform of the limiting eigenvalue distribution of the N x N
/// Gram matrix, m_tilde(x) = c*m(x) - (1-c)/x its companion for the n x n
/// Gram matrix, and g(x) = x*m(x)*m_tilde(x) the spike function whose level
/// sets locate isolated eigenvalues.
///
/// All point evaluations require x >= lambda_plus() + kEdgeMargin; below that
/// the formulas degenerate and a std::domain_error is thrown rather than
/// extrapolating.
class SpectralModel {
 public:
  /// Evaluation floor above the right bulk edge (absolute).
  static constexpr double kEdgeMargin = 1e-8;

  virtual ~SpectralModel() = default;

  /// Aspect ratio c = lim N/n, in (0, 1].
  virtual double aspect_ratio() const noexcept = 0;
  /// Left edge of the bulk support.
  virtual double lambda_minus() const noexcept = 0;
  /// Right edge of the bulk support.
  virtual double lambda_plus() const noexcept = 0;
  /// Stieltjes transform m(x), real branch for x above the bulk.
  virtual double stieltjes(double x) const = 0;
  /// Closed-form m'(x); the finite-difference version lives in tests only.
  virtual double stieltjes_derivative(double x) const = 0;
  /// One-sided limit of the spike function at the right edge, g(lambda_plus+).
  virtual double spike_function_at_edge() const noexcept = 0;

  /// Companion transform m_tilde(x) = c*m(x) - (1-c)/x.
  double companion_stieltjes(double x) const;
  /// d/dx of the companion transform.
  double companion_stieltjes_derivative(double x) const;

  /// Spike function g(x) = x*m(x)*m_tilde(x); positive and strictly
  /// decreasing on (lambda_plus, infinity), with limits g(lambda_plus+) and 0.
  double spike_function(double x) const;
  /// g'(x) = m*m_tilde + x*m'*m_tilde + x*m*m_tilde' (negative above the edge).
  double spike_function_derivative(double x) const;

  /// Spike weight zeta(lambda) = g'(lambda) / (lambda * m(lambda)^2 *
  /// m_tilde(lambda)); >= 1 over the range of isolated-eigenvalue limits.
  double zeta(double lambda) const;

  /// Smallest perturbation power omega_sq with an isolated eigenvalue,
  /// 1 / g(lambda_plus+).
  double detection_threshold() const;
  /// True when omega_sq produces an isolated eigenvalue above the bulk.
  bool detectable(double omega_sq) const;

  /// Isolated-eigenvalue limit: the unique rho > lambda_plus solving
  /// omega_sq * g(rho) = 1. Bracketed bisection to 1e-8 then Newton polish to
  /// residual |omega_sq*g(rho) - 1| < 1e-12. When the root lies between the
  /// edge and the evaluation floor (omega_sq within O(1e-4) of threshold) the
  /// floor point is returned. Throws std::domain_error when undetectable.
  double solve_rho(double omega_sq) const;

  /// Limiting attenuation 1/zeta(rho(omega_sq)) of the signal-subspace
  /// quadratic form; in (0, 1], increasing in omega_sq.
  double subspace_bias(double omega_sq) const;

  /// Leading coefficient sigma^2 of the angle estimator fluctuation,
  /// Var(phi_hat) ~ sigma^2 / n^3, for one source of power omega_sq and
  /// steering constant D:
  ///   sigma^2 = 6/(c^2 D^2) * [ (m'(rho) - m(rho)^2) / (c m(rho)^2)
  ///                             + omega_sq (m(rho) + rho m'(rho)) ].
  double asymptotic_variance(double omega_sq, double steering_scale) const;

 protected:
  /// Throws std::domain_error unless x >= lambda_plus() + kEdgeMargin.
  void require_above_edge(double x) const;
  /// Upper end of the rho search bracket; must satisfy omega_sq*g(hi) < 1.
  virtual double rho_bracket_upper(double omega_sq) const;
};

/// Marchenko-Pastur law with unit variance scaling: bulk support
/// [(1-sqrt(c))^2, (1+sqrt(c))^2], and for x above the bulk
///   m(x) = 2 / (u - s),  u = 1 - c - x,  s = +sqrt(u^2 - 4cx),
/// the principal-root branch rearranged to avoid cancellation.
class MarchenkoPasturModel final : public SpectralModel {
 public:
  /// Requires 0 < aspect_ratio <= 1.
  explicit MarchenkoPasturModel(double aspect_ratio);

  double aspect_ratio() const noexcept override { return c_; }
  double lambda_minus() const noexcept override { return lambda_minus_; }
  double lambda_plus() const noexcept override { return lambda_plus_; }
  double stieltjes(double x) const override;
  double stieltjes_derivative(double x) const override;
  /// Exact edge value 1/sqrt(c).
  double spike_function_at_edge() const noexcept override;

  /// Closed-form isolated-eigenvalue limit (omega_sq + 1)(omega_sq + c) /
  /// omega_sq, valid for omega_sq > sqrt(c). Used as the solver's bracket
  /// hint and as an independent cross-check of solve_rho.
  double rho_closed_form(double omega_sq) const;

  /// Closed-form variance coefficient 6/(c^2 D^2) * (omega_sq + 1) /
  /// (omega_sq^2 - c); equals asymptotic_variance for this law.
  double variance_closed_form(double omega_sq, double steering_scale) const;

  /// High-SNR Cramer-Rao coefficient 6 / (c^2 D^2 omega_sq); the variance
  /// coefficient approaches it as omega_sq grows.
  double crlb_high_snr(double omega_sq, double steering_scale) const;

 protected:
  double rho_bracket_upper(double omega_sq) const override;

 private:
  double c_;
  double lambda_minus_;
  double lambda_plus_;
};

/// Bundle of the per-source first- and second-order predictions.
struct SpikePrediction {
  double omega_sq = 0.0;
  bool detectable = false;
  /// Isolated eigenvalue limit; NaN when undetectable.
  double rho = 0.0;
  /// Limit of b(phi)* Pi_hat b(phi); NaN when undetectable.
  double subspace_bias = 0.0;
  /// Variance coefficient, Var(phi_hat) ~ sigma_sq / n^3; NaN when
  /// undetectable.
  double sigma_sq = 0.0;
  /// High-SNR Cramer-Rao coefficient (defined for every omega_sq > 0).
  double crlb_sigma_sq = 0.0;
};

/// Evaluates every prediction for a single source of power omega_sq.
SpikePrediction predict_spike(const MarchenkoPasturModel& model,
                              double omega_sq, double steering_scale);

}  // namespace spikemusic
