#pragma once

// Exponential Euler integration of
//   d omega = (nu Laplace omega - r omega - beta psi_x - J(psi, omega)) dt + dW
// on the truncated sine basis, with exactly sampled forcing increments.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qgens/noise.hpp"
#include "qgens/spectral.hpp"

namespace qgens {

enum class Nonlinearity { full, linearized };

struct ModelParams {
  double viscosity = 1.0;  // nu
  double ekman = 0.1;      // r
  double beta = 0.0;
  Nonlinearity nonlinearity = Nonlinearity::full;
  bool beta_term = true;

  /// Throws std::invalid_argument unless nu > 0, r >= 0, beta >= 0.
  void validate() const;
};

struct InitialCondition {
  enum class Kind { zero, explicit_coeffs, gaussian };
  Kind kind = Kind::zero;
  std::vector<double> values;  // coefficients or per-mode standard deviations, rank order
};

struct SimConfig {
  int truncation = 16;
  double dt = 1e-3;
  double horizon = 1.0;
  std::vector<double> output_times{0.0, 1.0};
  std::size_t n_paths = 1;
  std::uint64_t master_seed = 0;
  InitialCondition initial;
  bool record_fields = false;
  bool record_sup_norm = true;
  /// Multiplies the forcing amplitudes inside the solver only. Test hook for
  /// checking that oracle comparisons catch a mis-scaled forcing.
  double noise_scale = 1.0;

  /// Step index of every output time; throws if the config is inconsistent.
  std::vector<std::int64_t> output_steps() const;
  std::int64_t total_steps() const;
  void validate() const;
};

/// Snaps times to the nearest multiple of dt, drops duplicates, and returns
/// the number of times that moved by more than 1e-9 * dt.
std::size_t snap_output_times(std::vector<double>& times, double dt);

struct TrajectoryRecord {
  double time = 0.0;
  std::optional<SpectralField> omega;
  double omega_sq = 0.0;     // ||omega||^2
  double grad_sq = 0.0;      // ||grad omega||^2
  double conv_sq = 0.0;      // ||W_A||^2, pure convolution driven by the same draws
  double residual_sq = 0.0;  // ||omega - W_A||^2
  std::optional<double> conv_sup;  // grid sup of W_A, when recorded
};

struct PathTrajectory {
  std::size_t path_index = 0;
  std::vector<TrajectoryRecord> records;
};

/// Raised when a path produces non-finite coefficients.
class BlowupError : public std::runtime_error {
 public:
  struct Failure {
    std::size_t path_index;
    double time;
  };

  explicit BlowupError(std::vector<Failure> failures);
  const std::vector<Failure>& failures() const { return failures_; }

 private:
  std::vector<Failure> failures_;
};

/// Linear symbols l_k = lambda_k - r used by the propagator.
Eigen::VectorXd linear_rates(const Basis& basis, const ModelParams& params);

/// Everything one path needs that does not change between steps.
class QgModel {
 public:
  QgModel(BasisPtr basis, ModelParams params);

  const BasisPtr& basis() const { return basis_; }
  const ModelParams& params() const { return params_; }
  const Eigen::VectorXd& rates() const { return rates_; }

  /// -beta project(psi_x) - J(psi, omega), psi = Laplace^-1 omega. The -r omega
  /// part of the nonlinear operator lives in the linear rates instead.
  Eigen::VectorXd drift(const Eigen::VectorXd& omega) const;

 private:
  BasisPtr basis_;
  ModelParams params_;
  Eigen::VectorXd rates_;
  Eigen::VectorXd inverse_laplacian_;
  Eigen::MatrixXd dx_projection_;
  JacobianEvaluator jacobian_;
  std::vector<Eigen::Index> matrix_slot_;  // rank -> column-major slot in M x M
};

/// Coefficients of the exponential Euler update for one step size.
class ExponentialEuler {
 public:
  ExponentialEuler(const QgModel& model, const NoiseSpectrum& spectrum, double h,
                   double noise_scale = 1.0);

  double step_size() const { return propagator_.step(); }
  const OuPropagator& propagator() const { return propagator_; }

  /// a <- e^(l h) a + h phi1(l h) drift(a) + eta; the convolution state takes
  /// the same eta. `noise` holds one standard normal per mode.
  void advance(Eigen::VectorXd& omega, Eigen::VectorXd& conv, std::span<const double> noise) const;

 private:
  const QgModel* model_;
  OuPropagator propagator_;
  Eigen::VectorXd drift_weight_;  // h phi1(l h)
  mutable Eigen::VectorXd eta_;
};

/// (e^z - 1)/z with the removable singularity handled by its series.
double phi1(double z);

SpectralField drift(const SpectralField& omega, const ModelParams& params);

struct StepResult {
  SpectralField omega;
  ConvolutionState conv;
};

/// One exponential Euler step of size h. conv.rates must be lambda_k - r.
StepResult step(const SpectralField& omega, const ConvolutionState& conv, double h,
                std::span<const double> noise, const ModelParams& params,
                const NoiseSpectrum& spectrum);

/// Draws the initial vorticity from its own substream.
SpectralField initial_vorticity(const SimConfig& config, BasisPtr basis, std::size_t path_index);

PathTrajectory simulate_path(const SimConfig& config, const ModelParams& params,
                             const NoiseSpectrum& spectrum, std::size_t path_index);

/// Runs n_paths trajectories on up to `threads` workers; result is ordered by
/// path index and does not depend on the worker count.
std::vector<PathTrajectory> run_ensemble(const SimConfig& config, const ModelParams& params,
                                         const NoiseSpectrum& spectrum, unsigned threads = 1);

}  // namespace qgens
