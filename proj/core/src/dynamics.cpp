#include "qgens/dynamics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "qgens/rng.hpp"

namespace qgens {

void ModelParams::validate() const {
  if (!(viscosity > 0.0) || !std::isfinite(viscosity)) {
    throw std::invalid_argument("model.nu must be positive");
  }
  if (!(ekman >= 0.0) || !std::isfinite(ekman)) {
    throw std::invalid_argument("model.r must be non-negative");
  }
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("model.beta must be non-negative");
  }
}

std::size_t snap_output_times(std::vector<double>& times, double dt) {
  std::size_t moved = 0;
  for (double& t : times) {
    const double snapped = static_cast<double>(std::llround(t / dt)) * dt;
    if (std::abs(snapped - t) > 1e-9 * dt) ++moved;
    t = snapped;
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return moved;
}

std::int64_t SimConfig::total_steps() const { return std::llround(horizon / dt); }

std::vector<std::int64_t> SimConfig::output_steps() const {
  std::vector<std::int64_t> steps;
  steps.reserve(output_times.size());
  for (double t : output_times) {
    steps.push_back(std::llround(t / dt));
  }
  return steps;
}

void SimConfig::validate() const {
  if (truncation < 1) throw std::invalid_argument("sim.M must be >= 1");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("sim.dt must be positive");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw std::invalid_argument("sim.T must be positive");
  }
  if (dt > horizon) throw std::invalid_argument("sim.dt must not exceed sim.T");
  const double steps = horizon / dt;
  if (std::abs(steps - std::round(steps)) > 1e-6) {
    throw std::invalid_argument("sim.T must be a multiple of sim.dt");
  }
  if (n_paths < 1) throw std::invalid_argument("sim.n_paths must be >= 1");
  if (output_times.empty()) throw std::invalid_argument("sim.output_times must not be empty");
  for (std::size_t i = 0; i < output_times.size(); ++i) {
    const double t = output_times[i];
    if (!(t >= 0.0) || t > horizon * (1.0 + 1e-12)) {
      throw std::invalid_argument("sim.output_times must lie in [0, T]");
    }
    if (i > 0 && !(t > output_times[i - 1])) {
      throw std::invalid_argument("sim.output_times must be strictly increasing");
    }
    const double k = t / dt;
    if (std::abs(k - std::round(k)) > 1e-6) {
      throw std::invalid_argument("sim.output_times must be multiples of sim.dt");
    }
  }
  if (!(noise_scale >= 0.0)) throw std::invalid_argument("debug.noise_scale must be >= 0");
  const auto modes = static_cast<std::size_t>(truncation) * static_cast<std::size_t>(truncation);
  if (initial.kind != InitialCondition::Kind::zero && initial.values.size() != modes) {
    throw std::invalid_argument("sim.initial_condition.values must have M^2 entries");
  }
  if (initial.kind == InitialCondition::Kind::gaussian) {
    for (double s : initial.values) {
      if (!(s >= 0.0)) {
        throw std::invalid_argument("sim.initial_condition.values must be non-negative");
      }
    }
  }
}

namespace {

std::string describe_failures(const std::vector<BlowupError::Failure>& failures) {
  std::ostringstream out;
  out << "non-finite vorticity in " << failures.size() << " path(s):";
  for (const auto& f : failures) {
    out << " path " << f.path_index << " at t=" << f.time << ";";
  }
  return out.str();
}

}  // namespace

BlowupError::BlowupError(std::vector<Failure> failures)
    : std::runtime_error(describe_failures(failures)), failures_(std::move(failures)) {}

Eigen::VectorXd linear_rates(const Basis& basis, const ModelParams& params) {
  const auto eig = basis.eigenvalues();
  Eigen::VectorXd rates(static_cast<Eigen::Index>(eig.size()));
  for (std::size_t k = 0; k < eig.size(); ++k) {
    rates[static_cast<Eigen::Index>(k)] = eig[k] - params.ekman;
  }
  return rates;
}

QgModel::QgModel(BasisPtr basis, ModelParams params)
    : basis_(std::move(basis)),
      params_(params),
      rates_(linear_rates(*basis_, params_)),
      inverse_laplacian_(static_cast<Eigen::Index>(basis_->size())),
      dx_projection_(dx_projection_matrix(basis_->truncation())),
      jacobian_(basis_->truncation()) {
  if (std::abs(basis_->viscosity() - params_.viscosity) > 0.0) {
    throw std::invalid_argument("basis viscosity differs from model viscosity");
  }
  const auto symbols = basis_->laplacian_symbols();
  const int M = basis_->truncation();
  matrix_slot_.resize(basis_->size());
  for (std::size_t k = 0; k < basis_->size(); ++k) {
    inverse_laplacian_[static_cast<Eigen::Index>(k)] = 1.0 / symbols[k];
    const auto& mode = basis_->mode(k);
    matrix_slot_[k] = static_cast<Eigen::Index>((mode.n - 1) * M + (mode.m - 1));
  }
}

Eigen::VectorXd QgModel::drift(const Eigen::VectorXd& omega) const {
  const auto size = static_cast<Eigen::Index>(basis_->size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(size);
  const bool with_beta = params_.beta_term && params_.beta != 0.0;
  const bool with_jacobian = params_.nonlinearity == Nonlinearity::full;
  if (!with_beta && !with_jacobian) return out;

  const int M = basis_->truncation();
  Eigen::MatrixXd omega_mat(M, M);
  Eigen::MatrixXd psi_mat(M, M);
  for (Eigen::Index k = 0; k < size; ++k) {
    const auto slot = matrix_slot_[static_cast<std::size_t>(k)];
    omega_mat.data()[slot] = omega[k];
    psi_mat.data()[slot] = omega[k] * inverse_laplacian_[k];
  }

  Eigen::MatrixXd result = Eigen::MatrixXd::Zero(M, M);
  if (with_beta) result.noalias() -= params_.beta * (dx_projection_ * psi_mat);
  if (with_jacobian) result -= jacobian_(psi_mat, omega_mat);

  for (Eigen::Index k = 0; k < size; ++k) {
    out[k] = result.data()[matrix_slot_[static_cast<std::size_t>(k)]];
  }
  return out;
}

double phi1(double z) {
  if (std::abs(z) < 1e-5) return 1.0 + z * (0.5 + z / 6.0);
  return std::expm1(z) / z;
}

ExponentialEuler::ExponentialEuler(const QgModel& model, const NoiseSpectrum& spectrum, double h,
                                   double noise_scale)
    : model_(&model),
      propagator_(model.rates(), noise_scale * spectrum.amplitudes(), h),
      drift_weight_(model.rates().size()) {
  if (spectrum.size() != model.basis()->size()) {
    throw std::invalid_argument("noise spectrum has " + std::to_string(spectrum.size()) +
                                " modes, basis has " + std::to_string(model.basis()->size()));
  }
  for (Eigen::Index k = 0; k < drift_weight_.size(); ++k) {
    drift_weight_[k] = h * phi1(model.rates()[k] * h);
  }
}

void ExponentialEuler::advance(Eigen::VectorXd& omega, Eigen::VectorXd& conv,
                               std::span<const double> noise) const {
  const ModelParams& params = model_->params();
  const bool has_drift = params.nonlinearity == Nonlinearity::full ||
                         (params.beta_term && params.beta != 0.0);
  propagator_.increment(noise, eta_);
  const auto& decay = propagator_.decay();
  if (has_drift) {
    const Eigen::VectorXd d = model_->drift(omega);
    omega = decay.cwiseProduct(omega) + drift_weight_.cwiseProduct(d) + eta_;
  } else {
    omega = decay.cwiseProduct(omega) + eta_;
  }
  conv = decay.cwiseProduct(conv) + eta_;
}

SpectralField drift(const SpectralField& omega, const ModelParams& params) {
  ModelParams adjusted = params;
  adjusted.viscosity = omega.basis->viscosity();
  const QgModel model(omega.basis, adjusted);
  return SpectralField{omega.basis, model.drift(omega.coeffs)};
}

StepResult step(const SpectralField& omega, const ConvolutionState& conv, double h,
                std::span<const double> noise, const ModelParams& params,
                const NoiseSpectrum& spectrum) {
  if (!(h > 0.0)) throw std::invalid_argument("step h must be positive");
  if (noise.size() != omega.basis->size()) {
    throw std::invalid_argument("noise vector must have one entry per mode");
  }
  const QgModel model(omega.basis, params);
  const ExponentialEuler scheme(model, spectrum, h);
  StepResult result{omega, conv};
  scheme.advance(result.omega.coeffs, result.conv.values, noise);
  result.conv.time = conv.time + h;
  return result;
}

SpectralField initial_vorticity(const SimConfig& config, BasisPtr basis, std::size_t path_index) {
  SpectralField omega = SpectralField::zeros(std::move(basis));
  const auto& ic = config.initial;
  switch (ic.kind) {
    case InitialCondition::Kind::zero:
      break;
    case InitialCondition::Kind::explicit_coeffs:
      for (std::size_t k = 0; k < ic.values.size(); ++k) {
        omega.coeffs[static_cast<Eigen::Index>(k)] = ic.values[k];
      }
      break;
    case InitialCondition::Kind::gaussian: {
      NormalStream stream(config.master_seed, path_index, Substream::initial_condition);
      for (std::size_t k = 0; k < ic.values.size(); ++k) {
        omega.coeffs[static_cast<Eigen::Index>(k)] = ic.values[k] * stream.next();
      }
      break;
    }
  }
  return omega;
}

namespace {

struct PathContext {
  const SimConfig& config;
  const QgModel& model;
  const ExponentialEuler& scheme;
  std::optional<SineTransform> sup_transform;
  std::vector<std::int64_t> output_steps;
};

TrajectoryRecord make_record(const PathContext& ctx, double time, const Eigen::VectorXd& omega,
                             const Eigen::VectorXd& conv) {
  const auto& basis = ctx.model.basis();
  const auto symbols = basis->laplacian_symbols();
  TrajectoryRecord rec;
  rec.time = time;
  rec.omega_sq = omega.squaredNorm();
  double grad = 0.0;
  for (Eigen::Index k = 0; k < omega.size(); ++k) {
    grad += -symbols[static_cast<std::size_t>(k)] * omega[k] * omega[k];
  }
  rec.grad_sq = grad;
  rec.conv_sq = conv.squaredNorm();
  rec.residual_sq = (omega - conv).squaredNorm();
  if (ctx.sup_transform) {
    const SpectralField v{basis, conv};
    rec.conv_sup = ctx.sup_transform->to_grid(v.as_matrix()).cwiseAbs().maxCoeff();
  }
  if (ctx.config.record_fields) rec.omega = SpectralField{basis, omega};
  return rec;
}

PathTrajectory run_path(const PathContext& ctx, std::size_t path_index) {
  const auto& config = ctx.config;
  const auto& basis = ctx.model.basis();
  PathTrajectory traj;
  traj.path_index = path_index;
  traj.records.reserve(ctx.output_steps.size());

  Eigen::VectorXd omega = initial_vorticity(config, basis, path_index).coeffs;
  Eigen::VectorXd conv = Eigen::VectorXd::Zero(omega.size());
  NormalStream forcing(config.master_seed, path_index, Substream::forcing);
  std::vector<double> noise(basis->size());

  const std::int64_t total = config.total_steps();
  std::size_t next_output = 0;
  for (std::int64_t n = 0; n <= total && next_output < ctx.output_steps.size(); ++n) {
    if (ctx.output_steps[next_output] == n) {
      const double t = static_cast<double>(n) * config.dt;
      if (!omega.allFinite()) {
        throw BlowupError({BlowupError::Failure{path_index, t}});
      }
      traj.records.push_back(make_record(ctx, t, omega, conv));
      ++next_output;
    }
    if (n < total && next_output < ctx.output_steps.size()) {
      forcing.fill(noise);
      ctx.scheme.advance(omega, conv, noise);
    }
  }
  return traj;
}

}  // namespace

PathTrajectory simulate_path(const SimConfig& config, const ModelParams& params,
                             const NoiseSpectrum& spectrum, std::size_t path_index) {
  config.validate();
  params.validate();
  const QgModel model(build_basis(config.truncation, params.viscosity), params);
  const ExponentialEuler scheme(model, spectrum, config.dt, config.noise_scale);
  PathContext ctx{config, model, scheme, std::nullopt, config.output_steps()};
  if (config.record_sup_norm) ctx.sup_transform.emplace(config.truncation, 4 * config.truncation);
  return run_path(ctx, path_index);
}

std::vector<PathTrajectory> run_ensemble(const SimConfig& config, const ModelParams& params,
                                         const NoiseSpectrum& spectrum, unsigned threads) {
  config.validate();
  params.validate();
  const QgModel model(build_basis(config.truncation, params.viscosity), params);
  const ExponentialEuler scheme(model, spectrum, config.dt, config.noise_scale);
  PathContext ctx{config, model, scheme, std::nullopt, config.output_steps()};
  if (config.record_sup_norm) ctx.sup_transform.emplace(config.truncation, 4 * config.truncation);

  std::vector<PathTrajectory> out(config.n_paths);
  std::vector<std::optional<BlowupError::Failure>> failures(config.n_paths);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&] {
    // each worker advances its own scratch copy of the scheme
    const ExponentialEuler local = scheme;
    const PathContext local_ctx{ctx.config, ctx.model, local, ctx.sup_transform, ctx.output_steps};
    for (std::size_t i = next.fetch_add(1); i < config.n_paths; i = next.fetch_add(1)) {
      try {
        out[i] = run_path(local_ctx, i);
      } catch (const BlowupError& e) {
        failures[i] = e.failures().front();
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };

  const unsigned workers =
      std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(config.n_paths)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  std::vector<BlowupError::Failure> failed;
  for (const auto& f : failures) {
    if (f) failed.push_back(*f);
  }
  if (!failed.empty()) throw BlowupError(std::move(failed));
  return out;
}

}  // namespace qgens
