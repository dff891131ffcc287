#include "qgens/noise.hpp"

#include <cmath>
#include <numeric>

namespace qgens {

namespace {

void require_theta(double theta) {
  if (!(theta > 0.0 && theta < 1.0)) {
    throw std::invalid_argument("theta must lie in (0, 1), got " + std::to_string(theta));
  }
}

void require_rates(std::span<const double> rates) {
  for (double rate : rates) {
    if (!(rate < 0.0)) {
      throw std::invalid_argument("convolution rates must be strictly negative");
    }
  }
}

// (1 - e^(2 l t)) / (-2 l), stable for small |l t|.
double ou_variance_factor(double rate, double t) { return -std::expm1(2.0 * rate * t) / (-2.0 * rate); }

}  // namespace

Eigen::VectorXd NoiseSpectrum::amplitudes() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(mu_sq.size()));
  for (std::size_t k = 0; k < mu_sq.size(); ++k) {
    out[static_cast<Eigen::Index>(k)] = std::sqrt(mu_sq[k]);
  }
  return out;
}

NoiseSpectrum build_spectrum(std::size_t n_modes, double c_mu, double mu_exp, double theta) {
  require_theta(theta);
  if (!(c_mu >= 0.0) || !std::isfinite(c_mu)) {
    throw std::invalid_argument("c_mu must be non-negative and finite");
  }
  if (!std::isfinite(mu_exp)) {
    throw std::invalid_argument("mu_exp must be finite");
  }
  if (mu_exp <= theta) {
    throw SummabilityError("mu_exp = " + std::to_string(mu_exp) + " <= theta = " +
                           std::to_string(theta) + ": forcing is not summable");
  }
  NoiseSpectrum spectrum;
  spectrum.theta = theta;
  spectrum.rule = PowerLawRule{c_mu, mu_exp};
  spectrum.trace_class = mu_exp > 1.0;
  spectrum.mu_sq.resize(n_modes);
  for (std::size_t k = 1; k <= n_modes; ++k) {
    spectrum.mu_sq[k - 1] = c_mu * std::pow(static_cast<double>(k), -mu_exp);
  }
  return spectrum;
}

NoiseSpectrum build_spectrum(const Basis& basis, double c_mu, double mu_exp, double theta) {
  return build_spectrum(basis.size(), c_mu, mu_exp, theta);
}

NoiseSpectrum spectrum_from_list(std::vector<double> mu_sq, double theta) {
  require_theta(theta);
  for (double v : mu_sq) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("mu_sq entries must be non-negative and finite");
    }
  }
  NoiseSpectrum spectrum;
  spectrum.theta = theta;
  spectrum.mu_sq = std::move(mu_sq);
  spectrum.trace_class = true;
  return spectrum;
}

double trace(const NoiseSpectrum& spectrum) {
  return std::accumulate(spectrum.mu_sq.begin(), spectrum.mu_sq.end(), 0.0);
}

double phi_alpha(const NoiseSpectrum& spectrum, std::span<const double> eigenvalues, double alpha) {
  if (!(alpha >= 0.0)) {
    throw std::invalid_argument("alpha must be non-negative");
  }
  if (eigenvalues.size() < spectrum.size()) {
    throw std::invalid_argument("fewer eigenvalues than spectrum modes");
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    const double lambda = eigenvalues[k];
    acc += spectrum.mu_sq[k] * std::pow(std::abs(lambda), spectrum.theta) / (alpha - lambda);
  }
  return acc;
}

bool weighted_trace_finite(const NoiseSpectrum& spectrum) {
  if (!spectrum.rule) return true;
  return spectrum.rule->decay - spectrum.theta > 1.0;
}

double convolution_tail_bound(const NoiseSpectrum& spectrum, double viscosity) {
  if (!spectrum.rule || spectrum.size() == 0) return 0.0;
  const double K = static_cast<double>(spectrum.size());
  const double mu = spectrum.rule->decay;
  return spectrum.rule->amplitude * std::pow(K, -mu) / (8.0 * kPi * viscosity * mu);
}

ConvolutionState ConvolutionState::zeros(Eigen::VectorXd rates) {
  require_rates(std::span<const double>(rates.data(), static_cast<std::size_t>(rates.size())));
  const auto size = rates.size();
  return ConvolutionState{Eigen::VectorXd::Zero(size), std::move(rates), 0.0};
}

ConvolutionState ou_increment(const ConvolutionState& state, const NoiseSpectrum& spectrum,
                              double h, std::span<const double> noise) {
  if (!(h > 0.0)) {
    throw std::invalid_argument("step h must be positive");
  }
  const auto modes = static_cast<std::size_t>(state.values.size());
  if (noise.size() != modes || spectrum.size() != modes ||
      static_cast<std::size_t>(state.rates.size()) != modes) {
    throw std::invalid_argument("noise, spectrum and state sizes differ");
  }
  ConvolutionState next = state;
  for (std::size_t k = 0; k < modes; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double rate = state.rates[i];
    next.values[i] = std::exp(rate * h) * state.values[i] +
                     std::sqrt(spectrum.mu_sq[k] * ou_variance_factor(rate, h)) * noise[k];
  }
  next.time = state.time + h;
  return next;
}

OuPropagator::OuPropagator(const Eigen::VectorXd& rates, const Eigen::VectorXd& amplitudes,
                           double h)
    : h_(h), decay_(rates.size()), scale_(rates.size()) {
  if (!(h > 0.0)) {
    throw std::invalid_argument("step h must be positive");
  }
  if (rates.size() != amplitudes.size()) {
    throw std::invalid_argument("rates and amplitudes sizes differ");
  }
  require_rates(std::span<const double>(rates.data(), static_cast<std::size_t>(rates.size())));
  for (Eigen::Index k = 0; k < rates.size(); ++k) {
    decay_[k] = std::exp(rates[k] * h);
    scale_[k] = amplitudes[k] * std::sqrt(ou_variance_factor(rates[k], h));
  }
}

void OuPropagator::increment(std::span<const double> noise, Eigen::VectorXd& out) const {
  out = scale_.cwiseProduct(
      Eigen::Map<const Eigen::VectorXd>(noise.data(), static_cast<Eigen::Index>(noise.size())));
}

double analytic_mode_variance(double mu_sq, double rate, double t) {
  if (t <= 0.0) return 0.0;
  return mu_sq * ou_variance_factor(rate, t);
}

double analytic_convolution_variance(const NoiseSpectrum& spectrum, std::span<const double> rates,
                                     double t) {
  if (!(t >= 0.0)) {
    throw std::invalid_argument("time must be non-negative");
  }
  if (rates.size() < spectrum.size()) {
    throw std::invalid_argument("fewer rates than spectrum modes");
  }
  require_rates(rates.first(spectrum.size()));
  double acc = 0.0;
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    acc += analytic_mode_variance(spectrum.mu_sq[k], rates[k], t);
  }
  return acc;
}

}  // namespace qgens
