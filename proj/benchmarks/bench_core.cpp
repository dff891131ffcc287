#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "qgens/dynamics.hpp"
#include "qgens/noise.hpp"
#include "qgens/rng.hpp"
#include "qgens/spectral.hpp"

namespace {

Eigen::MatrixXd random_matrix(int m, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist;
  Eigen::MatrixXd out(m, m);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = dist(gen);
  return out;
}

void BM_Jacobian(benchmark::State& state) {
  const int M = static_cast<int>(state.range(0));
  const qgens::JacobianEvaluator jac(M);
  const Eigen::MatrixXd psi = random_matrix(M, 1);
  const Eigen::MatrixXd omega = random_matrix(M, 2);
  for (auto _ : state) benchmark::DoNotOptimize(jac(psi, omega));
}
BENCHMARK(BM_Jacobian)->Arg(8)->Arg(16)->Arg(32);

void BM_Step(benchmark::State& state) {
  const int M = static_cast<int>(state.range(0));
  qgens::ModelParams params;
  if (state.range(1) == 0) params.nonlinearity = qgens::Nonlinearity::linearized;
  const auto basis = qgens::build_basis(M, params.viscosity);
  const qgens::QgModel model(basis, params);
  const auto spectrum = qgens::build_spectrum(*basis, 1.0, 2.0, 0.1);
  const qgens::ExponentialEuler scheme(model, spectrum, 1e-3);
  qgens::NormalStream stream(0, 0, qgens::Substream::forcing);
  std::vector<double> noise(basis->size());
  Eigen::VectorXd omega = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis->size()));
  Eigen::VectorXd conv = omega;
  for (auto _ : state) {
    stream.fill(noise);
    scheme.advance(omega, conv, noise);
  }
}
BENCHMARK(BM_Step)->Args({16, 0})->Args({16, 1})->Args({32, 1});

void BM_NormalFill(benchmark::State& state) {
  qgens::NormalStream stream(0, 0, qgens::Substream::forcing);
  std::vector<double> noise(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    stream.fill(noise);
    benchmark::DoNotOptimize(noise.data());
  }
}
BENCHMARK(BM_NormalFill)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
