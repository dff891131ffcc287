#pragma once

// Orthonormal Dirichlet sine basis on the unit square and the pseudospectral
// machinery built on it (grid transforms, derivatives, dealiased Jacobian).

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace qgens {

inline constexpr double kPi = 3.14159265358979323846;

/// Wavenumber pair of a basis function together with its global rank k (1-based).
struct ModeIndex {
  int m = 1;
  int n = 1;
  std::size_t k = 1;
};

/// Truncated eigenbasis of A = nu*Laplace on (0,1)^2 with Dirichlet data.
///
/// Modes (m, n) with 1 <= m, n <= M are ranked ascending in m^2 + n^2 with a
/// lexicographic (m, n) tie-break, so eigenvalues are non-increasing in rank.
/// phi_mn(x, y) = 2 sin(m pi x) sin(n pi y) is L2-normalised.
class Basis {
 public:
  Basis(int truncation, double viscosity);

  int truncation() const { return truncation_; }
  double viscosity() const { return viscosity_; }
  std::size_t size() const { return modes_.size(); }

  const std::vector<ModeIndex>& modes() const { return modes_; }
  const ModeIndex& mode(std::size_t idx) const { return modes_[idx]; }

  /// lambda_k = -nu (m^2 + n^2) pi^2, indexed by rank - 1.
  std::span<const double> eigenvalues() const { return eigenvalues_; }

  /// -(m^2 + n^2) pi^2, the symbol of the bare Laplacian.
  std::span<const double> laplacian_symbols() const { return laplacian_; }

  /// 0-based storage index of mode (m, n).
  std::size_t index_of(int m, int n) const {
    return rank_lookup_[static_cast<std::size_t>((m - 1) * truncation_ + (n - 1))];
  }

 private:
  int truncation_;
  double viscosity_;
  std::vector<ModeIndex> modes_;
  std::vector<double> eigenvalues_;
  std::vector<double> laplacian_;
  std::vector<std::size_t> rank_lookup_;
};

using BasisPtr = std::shared_ptr<const Basis>;

/// Throws std::invalid_argument unless M >= 1 and nu > 0.
BasisPtr build_basis(int truncation, double viscosity);

/// Coefficients over a Basis, stored in rank order.
struct SpectralField {
  BasisPtr basis;
  Eigen::VectorXd coeffs;

  static SpectralField zeros(BasisPtr basis);

  double& at(int m, int n) { return coeffs[static_cast<Eigen::Index>(basis->index_of(m, n))]; }
  double at(int m, int n) const {
    return coeffs[static_cast<Eigen::Index>(basis->index_of(m, n))];
  }

  /// Coefficients rearranged as an M x M matrix, entry (m-1, n-1).
  Eigen::MatrixXd as_matrix() const;
  static SpectralField from_matrix(BasisPtr basis, const Eigen::MatrixXd& mat);
};

/// Values on the interior points x_i = i/P, i = 1..P-1 (same in y).
/// values(i-1, j-1) holds the value at (x_i, y_j).
struct GridField {
  int resolution = 0;
  Eigen::MatrixXd values;
};

/// Smallest grid resolution that projects quadratic products of degree-M
/// content back onto modes 1..M without aliasing: P = ceil(3M/2) + 1.
int dealiased_resolution(int truncation);

/// Separable evaluation matrices for one (M, P) pair.
///
/// sine(i, m)   = sqrt(2) sin(m pi x_i)
/// dcos(i, m)   = sqrt(2) m pi cos(m pi x_i)
/// so phi_mn = sine(:, m) sine(:, n)^T and d/dx phi_mn = dcos(:, m) sine(:, n)^T.
class SineTransform {
 public:
  SineTransform(int truncation, int resolution);

  int truncation() const { return truncation_; }
  int resolution() const { return resolution_; }

  Eigen::MatrixXd to_grid(const Eigen::MatrixXd& coeffs) const;
  Eigen::MatrixXd from_grid(const Eigen::MatrixXd& values) const;
  Eigen::MatrixXd dx(const Eigen::MatrixXd& coeffs) const;
  Eigen::MatrixXd dy(const Eigen::MatrixXd& coeffs) const;

  const Eigen::MatrixXd& sine() const { return sine_; }
  const Eigen::MatrixXd& dcos() const { return dcos_; }

 private:
  int truncation_;
  int resolution_;
  Eigen::MatrixXd sine_;
  Eigen::MatrixXd dcos_;
};

double parseval_norm(const SpectralField& f);

/// H1 seminorm ||grad f||, using ||grad phi_mn||^2 = (m^2 + n^2) pi^2.
double gradient_norm(const SpectralField& f);

/// L2 inner product of two fields on the same basis.
double inner(const SpectralField& a, const SpectralField& b);

/// Stream function psi with Laplace(psi) = omega, psi = 0 on the boundary.
SpectralField laplace_invert(const SpectralField& omega);

/// Applies the Laplacian, the inverse of laplace_invert.
SpectralField laplace_apply(const SpectralField& psi);

/// Requires P >= M + 1.
GridField to_grid(const SpectralField& f, int resolution);
SpectralField from_grid(const GridField& g, BasisPtr basis);

/// Mixed cosine-sine evaluation of the x (resp. y) derivative on the grid.
/// Requires P >= dealiased_resolution(M).
GridField derivative_x(const SpectralField& f, int resolution);
GridField derivative_y(const SpectralField& f, int resolution);

/// Galerkin projection of psi_x onto the sine basis.
///
/// The x-derivative of sine content is cosine content in x, which the
/// interior-point rule does not integrate exactly against sines. The
/// projection therefore uses the closed-form integrals
///   <d/dx phi_an, phi_kn> = 4 a k / (k^2 - a^2) for a + k odd, 0 otherwise.
SpectralField project_dx(const SpectralField& f);

/// M x M matrix X with (project_dx f) = X * F in matrix form.
Eigen::MatrixXd dx_projection_matrix(int truncation);

/// Dealiased Galerkin Jacobian J(psi, omega) = psi_x omega_y - psi_y omega_x.
SpectralField jacobian(const SpectralField& psi, const SpectralField& omega);

/// Reusable evaluator for the dealiased Jacobian at a fixed truncation.
class JacobianEvaluator {
 public:
  explicit JacobianEvaluator(int truncation);

  /// Returns the projected Jacobian in M x M matrix form.
  Eigen::MatrixXd operator()(const Eigen::MatrixXd& psi, const Eigen::MatrixXd& omega) const;

  /// Pointwise psi_x omega_y - psi_y omega_x on the dealiased grid.
  Eigen::MatrixXd grid_values(const Eigen::MatrixXd& psi, const Eigen::MatrixXd& omega) const;

  const SineTransform& transform() const { return transform_; }

 private:
  SineTransform transform_;
};

/// max |f| over the collocation points; requires P >= 4M.
double grid_max_norm(const SpectralField& f, int resolution);

/// max |grad f| over the collocation points; requires P >= 4M.
double grid_max_gradient(const SpectralField& f, int resolution);

}  // namespace qgens
