#include "qgens/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace qgens {

namespace {

void require_same_basis(const SpectralField& a, const SpectralField& b) {
  if (a.basis->truncation() != b.basis->truncation()) {
    throw std::invalid_argument("fields live on different bases");
  }
}

void require_resolution(int resolution, int minimum, const char* what) {
  if (resolution < minimum) {
    throw std::invalid_argument(std::string(what) + ": resolution " + std::to_string(resolution) +
                                " below required " + std::to_string(minimum));
  }
}

}  // namespace

Basis::Basis(int truncation, double viscosity) : truncation_(truncation), viscosity_(viscosity) {
  if (truncation < 1) {
    throw std::invalid_argument("truncation order M must be >= 1");
  }
  if (!(viscosity > 0.0) || !std::isfinite(viscosity)) {
    throw std::invalid_argument("viscosity must be positive and finite");
  }
  const auto count = static_cast<std::size_t>(truncation) * static_cast<std::size_t>(truncation);
  modes_.reserve(count);
  for (int m = 1; m <= truncation; ++m) {
    for (int n = 1; n <= truncation; ++n) {
      modes_.push_back(ModeIndex{m, n, 0});
    }
  }
  std::stable_sort(modes_.begin(), modes_.end(), [](const ModeIndex& a, const ModeIndex& b) {
    const int sa = a.m * a.m + a.n * a.n;
    const int sb = b.m * b.m + b.n * b.n;
    if (sa != sb) return sa < sb;
    if (a.m != b.m) return a.m < b.m;
    return a.n < b.n;
  });

  rank_lookup_.assign(count, 0);
  eigenvalues_.resize(count);
  laplacian_.resize(count);
  for (std::size_t idx = 0; idx < count; ++idx) {
    auto& mode = modes_[idx];
    mode.k = idx + 1;
    const double wavenumber_sq = static_cast<double>(mode.m * mode.m + mode.n * mode.n);
    laplacian_[idx] = -wavenumber_sq * kPi * kPi;
    eigenvalues_[idx] = viscosity_ * laplacian_[idx];
    rank_lookup_[static_cast<std::size_t>((mode.m - 1) * truncation_ + (mode.n - 1))] = idx;
  }
}

BasisPtr build_basis(int truncation, double viscosity) {
  return std::make_shared<const Basis>(truncation, viscosity);
}

SpectralField SpectralField::zeros(BasisPtr basis) {
  const auto size = static_cast<Eigen::Index>(basis->size());
  return SpectralField{std::move(basis), Eigen::VectorXd::Zero(size)};
}

Eigen::MatrixXd SpectralField::as_matrix() const {
  const int M = basis->truncation();
  Eigen::MatrixXd mat(M, M);
  for (std::size_t idx = 0; idx < basis->size(); ++idx) {
    const auto& mode = basis->mode(idx);
    mat(mode.m - 1, mode.n - 1) = coeffs[static_cast<Eigen::Index>(idx)];
  }
  return mat;
}

SpectralField SpectralField::from_matrix(BasisPtr basis, const Eigen::MatrixXd& mat) {
  const int M = basis->truncation();
  if (mat.rows() != M || mat.cols() != M) {
    throw std::invalid_argument("coefficient matrix does not match basis truncation");
  }
  SpectralField f = zeros(std::move(basis));
  for (std::size_t idx = 0; idx < f.basis->size(); ++idx) {
    const auto& mode = f.basis->mode(idx);
    f.coeffs[static_cast<Eigen::Index>(idx)] = mat(mode.m - 1, mode.n - 1);
  }
  return f;
}

int dealiased_resolution(int truncation) { return (3 * truncation + 1) / 2 + 1; }

SineTransform::SineTransform(int truncation, int resolution)
    : truncation_(truncation), resolution_(resolution) {
  if (truncation < 1) {
    throw std::invalid_argument("truncation order M must be >= 1");
  }
  require_resolution(resolution, truncation + 1, "sine transform");
  const int points = resolution - 1;
  sine_.resize(points, truncation);
  dcos_.resize(points, truncation);
  const double root2 = std::sqrt(2.0);
  for (int i = 1; i <= points; ++i) {
    for (int m = 1; m <= truncation; ++m) {
      // reduce m*i mod 2P before scaling so large products keep full accuracy
      const long phase = (static_cast<long>(m) * i) % (2L * resolution);
      const double angle = kPi * static_cast<double>(phase) / resolution;
      sine_(i - 1, m - 1) = root2 * std::sin(angle);
      dcos_(i - 1, m - 1) = root2 * m * kPi * std::cos(angle);
    }
  }
}

Eigen::MatrixXd SineTransform::to_grid(const Eigen::MatrixXd& coeffs) const {
  return sine_ * coeffs * sine_.transpose();
}

Eigen::MatrixXd SineTransform::from_grid(const Eigen::MatrixXd& values) const {
  const double scale = 1.0 / (static_cast<double>(resolution_) * resolution_);
  return scale * (sine_.transpose() * values * sine_);
}

Eigen::MatrixXd SineTransform::dx(const Eigen::MatrixXd& coeffs) const {
  return dcos_ * coeffs * sine_.transpose();
}

Eigen::MatrixXd SineTransform::dy(const Eigen::MatrixXd& coeffs) const {
  return sine_ * coeffs * dcos_.transpose();
}

double parseval_norm(const SpectralField& f) { return f.coeffs.norm(); }

double gradient_norm(const SpectralField& f) {
  const auto symbols = f.basis->laplacian_symbols();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < f.coeffs.size(); ++k) {
    acc += -symbols[static_cast<std::size_t>(k)] * f.coeffs[k] * f.coeffs[k];
  }
  return std::sqrt(acc);
}

double inner(const SpectralField& a, const SpectralField& b) {
  require_same_basis(a, b);
  return a.coeffs.dot(b.coeffs);
}

SpectralField laplace_invert(const SpectralField& omega) {
  SpectralField psi = omega;
  const auto symbols = omega.basis->laplacian_symbols();
  for (Eigen::Index k = 0; k < psi.coeffs.size(); ++k) {
    psi.coeffs[k] /= symbols[static_cast<std::size_t>(k)];
  }
  return psi;
}

SpectralField laplace_apply(const SpectralField& psi) {
  SpectralField omega = psi;
  const auto symbols = psi.basis->laplacian_symbols();
  for (Eigen::Index k = 0; k < omega.coeffs.size(); ++k) {
    omega.coeffs[k] *= symbols[static_cast<std::size_t>(k)];
  }
  return omega;
}

GridField to_grid(const SpectralField& f, int resolution) {
  const SineTransform transform(f.basis->truncation(), resolution);
  return GridField{resolution, transform.to_grid(f.as_matrix())};
}

SpectralField from_grid(const GridField& g, BasisPtr basis) {
  const int M = basis->truncation();
  require_resolution(g.resolution, M + 1, "from_grid");
  if (g.values.rows() != g.resolution - 1 || g.values.cols() != g.resolution - 1) {
    throw std::invalid_argument("grid values do not match resolution");
  }
  const SineTransform transform(M, g.resolution);
  return SpectralField::from_matrix(std::move(basis), transform.from_grid(g.values));
}

GridField derivative_x(const SpectralField& f, int resolution) {
  const int M = f.basis->truncation();
  require_resolution(resolution, dealiased_resolution(M), "derivative_x");
  const SineTransform transform(M, resolution);
  return GridField{resolution, transform.dx(f.as_matrix())};
}

GridField derivative_y(const SpectralField& f, int resolution) {
  const int M = f.basis->truncation();
  require_resolution(resolution, dealiased_resolution(M), "derivative_y");
  const SineTransform transform(M, resolution);
  return GridField{resolution, transform.dy(f.as_matrix())};
}

Eigen::MatrixXd dx_projection_matrix(int truncation) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(truncation, truncation);
  for (int k = 1; k <= truncation; ++k) {
    for (int a = 1; a <= truncation; ++a) {
      if ((k + a) % 2 == 1) {
        X(k - 1, a - 1) = 4.0 * a * k / static_cast<double>(k * k - a * a);
      }
    }
  }
  return X;
}

SpectralField project_dx(const SpectralField& f) {
  const Eigen::MatrixXd X = dx_projection_matrix(f.basis->truncation());
  return SpectralField::from_matrix(f.basis, X * f.as_matrix());
}

JacobianEvaluator::JacobianEvaluator(int truncation)
    : transform_(truncation, dealiased_resolution(truncation)) {}

Eigen::MatrixXd JacobianEvaluator::grid_values(const Eigen::MatrixXd& psi,
                                               const Eigen::MatrixXd& omega) const {
  const auto& S = transform_.sine();
  const auto& D = transform_.dcos();
  const Eigen::MatrixXd psi_St = psi * S.transpose();
  const Eigen::MatrixXd S_psi = S * psi;
  const Eigen::MatrixXd omega_St = omega * S.transpose();
  const Eigen::MatrixXd S_omega = S * omega;

  const Eigen::MatrixXd psi_x = D * psi_St;
  const Eigen::MatrixXd psi_y = S_psi * D.transpose();
  const Eigen::MatrixXd omega_x = D * omega_St;
  const Eigen::MatrixXd omega_y = S_omega * D.transpose();

  return psi_x.cwiseProduct(omega_y) - psi_y.cwiseProduct(omega_x);
}

Eigen::MatrixXd JacobianEvaluator::operator()(const Eigen::MatrixXd& psi,
                                              const Eigen::MatrixXd& omega) const {
  return transform_.from_grid(grid_values(psi, omega));
}

SpectralField jacobian(const SpectralField& psi, const SpectralField& omega) {
  require_same_basis(psi, omega);
  const JacobianEvaluator evaluator(psi.basis->truncation());
  return SpectralField::from_matrix(psi.basis, evaluator(psi.as_matrix(), omega.as_matrix()));
}

double grid_max_norm(const SpectralField& f, int resolution) {
  require_resolution(resolution, 4 * f.basis->truncation(), "grid_max_norm");
  return to_grid(f, resolution).values.cwiseAbs().maxCoeff();
}

double grid_max_gradient(const SpectralField& f, int resolution) {
  const int M = f.basis->truncation();
  require_resolution(resolution, 4 * M, "grid_max_gradient");
  const SineTransform transform(M, resolution);
  const Eigen::MatrixXd coeffs = f.as_matrix();
  const Eigen::MatrixXd gx = transform.dx(coeffs);
  const Eigen::MatrixXd gy = transform.dy(coeffs);
  return (gx.array().square() + gy.array().square()).sqrt().maxCoeff();
}

}  // namespace qgens
