#pragma once

// Diagonal Q-Wiener forcing W(t) = sum_k mu_k beta_k(t) phi_k and the
// mode-wise Ornstein-Uhlenbeck stochastic convolution it drives.

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qgens/spectral.hpp"

namespace qgens {

/// Thrown when a power-law spectrum violates sum mu_k^2 / |lambda_k|^(1-theta) < inf.
class SummabilityError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PowerLawRule {
  double amplitude = 1.0;  // c_mu
  double decay = 2.0;      // mu_exp, mu_k^2 = c_mu k^(-mu_exp)
};

struct NoiseSpectrum {
  std::vector<double> mu_sq;  // rank order
  double theta = 0.1;
  std::optional<PowerLawRule> rule;  // empty for explicit lists
  bool trace_class = true;           // asymptotic status of sum mu_k^2

  std::size_t size() const { return mu_sq.size(); }
  Eigen::VectorXd amplitudes() const;
};

/// mu_k = sqrt(c_mu) k^(-mu_exp/2) for k = 1..n_modes.
///
/// Rejects theta outside (0, 1), c_mu < 0, and mu_exp <= theta (with |lambda_k|
/// growing linearly in k this is the summability condition on the forcing).
NoiseSpectrum build_spectrum(std::size_t n_modes, double c_mu, double mu_exp, double theta);
NoiseSpectrum build_spectrum(const Basis& basis, double c_mu, double mu_exp, double theta);

/// Explicit per-mode variances. A finite list is always trace class.
NoiseSpectrum spectrum_from_list(std::vector<double> mu_sq, double theta);

/// Tr(Q) over the retained modes.
double trace(const NoiseSpectrum& spectrum);

/// phi(alpha) = sum_k mu_k^2 |lambda_k|^theta / (alpha - lambda_k).
double phi_alpha(const NoiseSpectrum& spectrum, std::span<const double> eigenvalues, double alpha);

/// Whether sum mu_k^2 |lambda_k|^theta stays finite as the truncation grows.
/// Decides between the two global-bound regimes; true for explicit lists.
bool weighted_trace_finite(const NoiseSpectrum& spectrum);

/// Upper bound on sum_{k > n_modes} mu_k^2 / (-2 lambda_k) for the power-law
/// rule, from |lambda_k| >= 4 pi nu k on the unit square. Zero for lists.
double convolution_tail_bound(const NoiseSpectrum& spectrum, double viscosity);

struct ConvolutionState {
  Eigen::VectorXd values;
  Eigen::VectorXd rates;  // strictly negative
  double time = 0.0;

  static ConvolutionState zeros(Eigen::VectorXd rates);
};

/// One exact Ornstein-Uhlenbeck transition of length h for every mode:
///   v_k <- e^(l_k h) v_k + mu_k sqrt((1 - e^(2 l_k h)) / (-2 l_k)) xi_k.
ConvolutionState ou_increment(const ConvolutionState& state, const NoiseSpectrum& spectrum,
                              double h, std::span<const double> noise);

/// Precomputed decay factors and noise scales for a fixed step size.
class OuPropagator {
 public:
  OuPropagator(const Eigen::VectorXd& rates, const Eigen::VectorXd& amplitudes, double h);

  double step() const { return h_; }
  const Eigen::VectorXd& decay() const { return decay_; }
  const Eigen::VectorXd& scale() const { return scale_; }

  /// Writes the Gaussian increment scale .* noise into `out`.
  void increment(std::span<const double> noise, Eigen::VectorXd& out) const;

 private:
  double h_;
  Eigen::VectorXd decay_;
  Eigen::VectorXd scale_;
};

/// mu^2 (1 - e^(2 l t)) / (-2 l), the variance of one mode started from 0.
double analytic_mode_variance(double mu_sq, double rate, double t);

/// E||W(t)||^2 summed over modes for the given per-mode rates.
double analytic_convolution_variance(const NoiseSpectrum& spectrum, std::span<const double> rates,
                                     double t);

}  // namespace qgens
