// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: qgens_acceptance [--threads N] [--only K]...

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "oracles.hpp"
#include "qgens/commands.hpp"
#include "qgens/dynamics.hpp"
#include "qgens/lab.hpp"
#include "qgens/noise.hpp"
#include "qgens/rng.hpp"
#include "qgens/spectral.hpp"

using namespace qgens;

namespace {

unsigned g_threads = 1;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Eigenvalue magnitudes (m^2 + n^2) pi^2 in rank order, built without the library.
std::vector<double> oracle_laplacian_magnitudes(int M) {
  std::vector<std::tuple<int, int, int>> modes;
  for (int m = 1; m <= M; ++m)
    for (int n = 1; n <= M; ++n) modes.emplace_back(m * m + n * n, m, n);
  std::sort(modes.begin(), modes.end());
  std::vector<double> out;
  for (const auto& [s, m, n] : modes) out.push_back(s * oracle::kPi * oracle::kPi);
  return out;
}

SpectralField to_field(const oracle::Field& f, const BasisPtr& basis) {
  Eigen::MatrixXd mat(f.M, f.M);
  for (int m = 1; m <= f.M; ++m)
    for (int n = 1; n <= f.M; ++n) mat(m - 1, n - 1) = f.at(m, n);
  return SpectralField::from_matrix(basis, mat);
}

double oracle_grad_sq(const oracle::Field& f) {
  double acc = 0.0;
  for (int m = 1; m <= f.M; ++m)
    for (int n = 1; n <= f.M; ++n) acc += f.at(m, n) * f.at(m, n) * (m * m + n * n);
  return acc * oracle::kPi * oracle::kPi;
}

double oracle_norm_sq(const oracle::Field& f) {
  double acc = 0.0;
  for (double c : f.c) acc += c * c;
  return acc;
}

EnstrophyTrace subset(const EnstrophyTrace& t, std::size_t stride) {
  EnstrophyTrace s;
  s.n_paths = t.n_paths;
  for (std::size_t i = 0; i < t.size(); i += stride) {
    s.times.push_back(t.times[i]);
    s.ens_mean.push_back(t.ens_mean[i]);
    s.ens_se.push_back(t.ens_se[i]);
  }
  return s;
}

std::vector<double> uniform_times(double T, int count) {
  std::vector<double> out;
  for (int i = 0; i < count; ++i) out.push_back(T * i / (count - 1));
  return out;
}

// Linear oracle equivalence at M = 16 with mu_k^2 = k^-2.
Outcome criterion1() {
  const int M = 16;
  SimConfig sim;
  sim.truncation = M;
  sim.dt = 1e-3;
  sim.horizon = 1.0;
  sim.output_times = uniform_times(1.0, 11);
  snap_output_times(sim.output_times, sim.dt);
  sim.n_paths = 2000;
  sim.master_seed = 20240601;
  sim.record_sup_norm = false;
  ModelParams p;
  p.nonlinearity = Nonlinearity::linearized;
  p.beta = 0.0;
  const auto basis = build_basis(M, p.viscosity);
  const auto spectrum = build_spectrum(*basis, 1.0, 2.0, 0.1);
  const auto trace = estimate_enstrophy(run_ensemble(sim, p, spectrum, g_threads));

  const auto lam = oracle_laplacian_magnitudes(M);
  double worst = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const double t = trace.times[i];
    double expected = 0.0;
    for (std::size_t k = 0; k < lam.size(); ++k) {
      const double mu_sq = 1.0 / std::pow(static_cast<double>(k + 1), 2.0);
      const double l = -lam[k] - p.ekman;
      expected += mu_sq * (1.0 - std::exp(2.0 * l * t)) / (-2.0 * l);
    }
    expected *= 0.5;
    const double diff = std::abs(trace.ens_mean[i] - expected);
    if (diff == 0.0) continue;
    worst = std::max(worst, trace.ens_se[i] > 0 ? diff / trace.ens_se[i] : INFINITY);
  }
  return {worst <= 3.0, "worst |z| = " + fmt(worst) + " over 11 times"};
}

// Jacobian orthogonality and J(f, f) = 0 on 100 random pairs.
Outcome criterion2() {
  const int M = 16;
  const auto basis = build_basis(M, 1.0);
  double worst_rel = 0.0;
  double worst_self = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto fp = oracle::random_field(M, 1000 + 2 * i);
    const auto fw = oracle::random_field(M, 1001 + 2 * i);
    const auto psi = to_field(fp, basis);
    const auto omega = to_field(fw, basis);
    const auto j = jacobian(psi, omega);
    const double gp = std::sqrt(oracle_grad_sq(fp));
    const double gw = std::sqrt(oracle_grad_sq(fw));
    const double jw = std::abs(j.coeffs.dot(omega.coeffs)) / (gp * gw * std::sqrt(oracle_norm_sq(fw)));
    const double jp = std::abs(j.coeffs.dot(psi.coeffs)) / (gp * gw * std::sqrt(oracle_norm_sq(fp)));
    worst_rel = std::max({worst_rel, jw, jp});
    worst_self = std::max(worst_self, jacobian(omega, omega).coeffs.cwiseAbs().maxCoeff());
  }
  return {worst_rel <= 1e-8 && worst_self <= 1e-12,
          "max relative <J,.> = " + fmt(worst_rel) + ", max |J(f,f)| = " + fmt(worst_self)};
}

// Round trips and norms against Gauss-Legendre quadrature of direct evaluations.
Outcome criterion3() {
  double worst = 0.0;
  for (int M : {1, 2, 5, 8, 16}) {
    const auto basis = build_basis(M, 1.0);
    for (int i = 0; i < 3; ++i) {
      const auto of = oracle::random_field(M, 77 * M + i);
      const auto f = to_field(of, basis);
      const double norm_sq = oracle_norm_sq(of);
      for (int P : {M + 1, dealiased_resolution(M), 4 * M}) {
        const auto g = to_grid(f, P);
        const auto back = from_grid(g, basis);
        worst = std::max(worst, (back.coeffs - f.coeffs).norm() / f.coeffs.norm());
        // the interior-point rule is exact for products of retained modes
        const double grid_sq = g.values.squaredNorm() / (static_cast<double>(P) * P);
        worst = std::max(worst, std::abs(grid_sq - norm_sq) / norm_sq);
      }
      const int n = std::max(24, 6 * M);
      const double quad = oracle::integrate2d([&](double x, double y) { return std::pow(of.value(x, y), 2); }, n);
      const double quad_grad = oracle::integrate2d(
          [&](double x, double y) { return std::pow(of.dx(x, y), 2) + std::pow(of.dy(x, y), 2); }, n);
      worst = std::max(worst, std::abs(std::pow(parseval_norm(f), 2) - quad) / quad);
      worst = std::max(worst, std::abs(std::pow(gradient_norm(f), 2) - quad_grad) / quad_grad);
    }
  }
  return {worst <= 1e-10, "worst relative error = " + fmt(worst)};
}

struct DeterministicRun {
  std::vector<double> ens;
  double max_balance_residual = 0.0;
  bool monotone = true;
};

// Integral over one step of c(s)^2 when c^2 varies exponentially between
// its endpoint values; exact for a decaying linear mode.
double log_mean_integral(double a, double b, double h) {
  if (a <= 0.0 || b <= 0.0) return 0.5 * h * (a + b);
  const double q = std::log(b / a);
  if (std::abs(q) < 1e-8) return 0.5 * h * (a + b);
  return h * (b - a) / q;
}

// Zero-noise run stepping the integrator directly; tracks the integrated balance
//   E(t) - E(0) + int_0^t (nu ||grad w||^2 + r ||w||^2) ds
// with the time integral taken mode by mode.
DeterministicRun deterministic_run(double dt, double T) {
  const int M = 16;
  ModelParams p;
  p.beta = 0.0;
  const auto basis = build_basis(M, p.viscosity);
  const QgModel model(basis, p);
  const auto spectrum = build_spectrum(*basis, 0.0, 2.0, 0.1);
  const ExponentialEuler scheme(model, spectrum, dt);
  const auto of = oracle::random_field(M, 4242, 2.0);
  Eigen::VectorXd omega = to_field(of, basis).coeffs * 40.0;
  Eigen::VectorXd conv = Eigen::VectorXd::Zero(omega.size());
  std::vector<double> noise(static_cast<std::size_t>(omega.size()), 0.0);
  const auto lam = oracle_laplacian_magnitudes(M);

  DeterministicRun run;
  const double e0 = 0.5 * omega.squaredNorm();
  run.ens.push_back(e0);
  double integral = 0.0;
  const auto steps = static_cast<long>(std::llround(T / dt));
  for (long s = 0; s < steps; ++s) {
    const Eigen::VectorXd before = omega;
    scheme.advance(omega, conv, noise);
    const double e_before = 0.5 * before.squaredNorm();
    const double e_after = 0.5 * omega.squaredNorm();
    if (!(e_after <= e_before)) run.monotone = false;
    for (Eigen::Index k = 0; k < omega.size(); ++k) {
      const double weight = p.viscosity * lam[static_cast<std::size_t>(k)] + p.ekman;
      integral += weight * log_mean_integral(before[k] * before[k], omega[k] * omega[k], dt);
    }
    run.ens.push_back(e_after);
    run.max_balance_residual = std::max(run.max_balance_residual, std::abs(e_after - e0 + integral) / e0);
  }
  return run;
}

// Deterministic dissipation and first-order energy balance.
Outcome criterion4() {
  const double T = 0.1;
  const auto coarse = deterministic_run(1e-3, T);
  const auto fine = deterministic_run(5e-4, T);
  const double ratio = fine.max_balance_residual / coarse.max_balance_residual;
  const double next_ratio = deterministic_run(2.5e-4, T).max_balance_residual / fine.max_balance_residual;
  const bool ok = coarse.monotone && fine.monotone && ratio >= 0.35 && ratio <= 0.65;
  return {ok, std::string("monotone = ") + (coarse.monotone && fine.monotone ? "yes" : "no") +
                  ", residual(dt) = " + fmt(coarse.max_balance_residual) + ", residual(dt/2) = " +
                  fmt(fine.max_balance_residual) + ", ratio = " + fmt(ratio) +
                  " (next halving " + fmt(next_ratio) + ")"};
}

// Full nonlinear stochastic run shared by criteria 5 and 7.
struct StochasticRun {
  EnstrophyTrace trace;
  NoiseSpectrum spectrum;
  ModelParams params;
};

const StochasticRun& stochastic_run() {
  static const StochasticRun run = [] {
    StochasticRun r;
    r.params.viscosity = 1.0;
    r.params.ekman = 0.1;
    r.params.beta = 0.0;
    SimConfig sim;
    sim.truncation = 16;
    sim.dt = 1e-3;
    sim.horizon = 1.0;
    sim.output_times = uniform_times(1.0, 1001);
    snap_output_times(sim.output_times, sim.dt);
    sim.n_paths = 1000;
    sim.master_seed = 5;
    sim.record_sup_norm = false;
    const auto basis = build_basis(sim.truncation, r.params.viscosity);
    r.spectrum = build_spectrum(*basis, 1.0, 2.0, 0.1);
    r.trace = estimate_enstrophy(run_ensemble(sim, r.params, r.spectrum, g_threads));
    return r;
  }();
  return run;
}

// Constant-free trace-class envelope at 21 times and its long-time limit.
Outcome criterion5() {
  const auto& run = stochastic_run();
  const auto trace = subset(run.trace, 50);
  const double gamma = gamma_threshold(run.params.viscosity, run.params.ekman, run.params.beta,
                                       dirichlet_poincare_constant()) + 0.1;
  const auto env = trace_class_envelope(trace.ens_mean.front(), gamma, run.spectrum, trace.times);
  const auto report = check_envelope(trace, env);
  const double limit = -qgens::trace(run.spectrum) / (4.0 * gamma);
  const double gap = std::abs(env.values.back() - limit) / std::abs(limit);
  const bool ok = trace.size() == 21 && report.verdict == Verdict::pass && gap <= 0.1;
  return {ok, "gamma = " + fmt(gamma) + ", violations = " + std::to_string(report.violation_times.size()) +
                  " of " + std::to_string(trace.size()) + ", Ens(1) = " + fmt(trace.ens_mean.back()) +
                  ", envelope(1) = " + fmt(env.values.back()) + ", gap to -TrQ/(4 gamma) = " + fmt(gap)};
}

double phi_slope(int M) {
  const auto basis = build_basis(M, 1.0);
  const auto spectrum = build_spectrum(*basis, 1.0, 0.6, 0.1);
  std::vector<double> alphas, values;
  for (int i = 0; i <= 20; ++i) {
    const double a = std::pow(10.0, 2.0 + 0.1 * i);
    alphas.push_back(a);
    values.push_back(phi_alpha(spectrum, basis->eigenvalues(), a));
  }
  return fit_power_law(alphas, values).slope;
}

// Log-log slope of phi(alpha) at M = 32.
Outcome criterion6() {
  const double target = 0.1 - 0.6;
  const double slope = phi_slope(32);
  const bool ok = std::abs(slope - target) <= 0.1 * std::abs(target);
  return {ok, "slope = " + fmt(slope) + " (target " + fmt(target) + " +- 10%); for reference M = 64 gives " +
                  fmt(phi_slope(64)) + ", M = 128 gives " + fmt(phi_slope(128))};
}

// Hoelder exponent floor on the criterion-5 trace, plus synthetic recovery.
Outcome criterion7() {
  const auto& run = stochastic_run();
  std::vector<double> lags;
  for (double decade : {1e-3, 1e-2}) {
    for (double f : {1.0, 2.0, 3.0, 5.0}) lags.push_back(f * decade);
  }
  lags.push_back(1e-1);
  const auto real = holder_exponent_fit(run.trace, run.trace.times[1], run.trace.times.back(), lags);

  std::vector<double> times;
  for (int j = 0; j <= 2000; ++j) times.push_back(1e-8 + j * 1e-4);
  const std::vector<double> syn_lags{1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3, 1e-2, 2e-2};
  auto synthetic = [&](double (*f)(double)) {
    EnstrophyTrace t;
    t.n_paths = 2;
    for (double s : times) {
      t.times.push_back(s);
      t.ens_mean.push_back(f(s));
      t.ens_se.push_back(0.0);
    }
    return holder_exponent_fit(t, times.front(), times.back(), syn_lags).exponent;
  };
  const double e_sqrt = synthetic([](double s) { return std::sqrt(s); });
  const double e_lin = synthetic([](double s) { return s; });
  const bool ok = real.verdict == Verdict::pass && real.exponent >= 0.2 &&
                  std::abs(e_sqrt - 0.5) <= 0.01 && std::abs(e_lin - 1.0) <= 0.01;
  return {ok, "trace exponent = " + fmt(real.exponent) + " (" + std::string(to_string(real.verdict)) + ", " +
                  std::to_string(real.lags.size()) + " lags kept), sqrt -> " + fmt(e_sqrt) + ", t -> " +
                  fmt(e_lin)};
}

std::vector<double> geometric_times(double t_min, double t_max, int count, double dt) {
  std::vector<double> out{0.0};
  for (int i = 0; i < count; ++i) out.push_back(t_min * std::pow(t_max / t_min, static_cast<double>(i) / (count - 1)));
  snap_output_times(out, dt);
  return out;
}

// Small-time asymptotics in its three forms.
Outcome criterion8() {
  std::ostringstream detail;
  bool ok = true;

  // (i) linear, r = beta = 0, zero start: omega coincides with the convolution
  {
    SimConfig sim;
    sim.truncation = 8;
    sim.dt = 1e-4;
    sim.horizon = 1e-2;
    sim.output_times = geometric_times(1e-4, 1e-2, 9, sim.dt);
    sim.n_paths = 50;
    sim.master_seed = 81;
    sim.record_sup_norm = false;
    ModelParams p;
    p.ekman = 0.0;
    p.nonlinearity = Nonlinearity::linearized;
    const auto basis = build_basis(sim.truncation, p.viscosity);
    const auto spectrum = build_spectrum(*basis, 1.0, 0.5, 0.1);
    const auto trace = estimate_enstrophy(run_ensemble(sim, p, spectrum, g_threads));
    double worst = 0.0;
    for (std::size_t i = 1; i < trace.size(); ++i) {
      worst = std::max(worst, std::abs(trace.ens_mean[i] / trace.wa_half_mean[i] - 1.0));
    }
    ok = ok && worst <= 1e-12;
    detail << "(i) max |ratio - 1| = " << fmt(worst);
  }

  // (ii) full nonlinear, zero start, delta = 0.5 spectrum
  {
    SimConfig sim;
    sim.truncation = 16;
    sim.dt = 2e-5;
    sim.horizon = 1e-2;
    sim.output_times = geometric_times(1e-4, 1e-2, 9, sim.dt);
    sim.n_paths = 4000;
    sim.master_seed = 82;
    sim.record_sup_norm = false;
    ModelParams p;
    const auto basis = build_basis(sim.truncation, p.viscosity);
    const auto spectrum = build_spectrum(*basis, 1.0, 0.5, 0.1);
    auto trace = estimate_enstrophy(run_ensemble(sim, p, spectrum, g_threads));
    AsymptoticsOptions opt;
    opt.mode = AsymptoticsMode::zero_initial;
    opt.delta = 0.5;
    opt.rho = 0.01;
    const auto r = asymptotics_check(trace, spectrum, basis->eigenvalues(), opt);
    bool ratio_ok = r.ratio_analytic.size() >= 2;
    for (std::size_t i = 0; i < std::min<std::size_t>(2, r.ratio_analytic.size()); ++i) {
      ratio_ok = ratio_ok && std::abs(r.ratio_analytic[i] - 1.0) <= 0.05;
    }
    const bool lemma4_ok = r.lemma4_exact || r.lemma4_exponent >= 0.43;
    ok = ok && ratio_ok && lemma4_ok;
    detail << "; (ii) ratios at t = " << fmt(r.times.at(0)) << ", " << fmt(r.times.at(1)) << ": "
           << fmt(r.ratio_analytic.at(0)) << ", " << fmt(r.ratio_analytic.at(1))
           << ", residual exponent = " << fmt(r.lemma4_exponent);
  }

  // (iii) deterministic start on phi_11, no forcing
  {
    SimConfig sim;
    sim.truncation = 8;
    sim.dt = 1e-6;
    sim.horizon = 1e-2;
    sim.output_times = geometric_times(1e-5, 1e-2, 13, sim.dt);
    sim.n_paths = 2;
    sim.record_sup_norm = false;
    sim.initial.kind = InitialCondition::Kind::explicit_coeffs;
    sim.initial.values.assign(64, 0.0);
    sim.initial.values[0] = 1.0;
    ModelParams p;
    const auto basis = build_basis(sim.truncation, p.viscosity);
    const auto spectrum = build_spectrum(*basis, 0.0, 2.0, 0.1);
    const auto trace = estimate_enstrophy(run_ensemble(sim, p, spectrum, g_threads));
    std::vector<double> t, d;
    for (std::size_t i = 1; i < trace.size(); ++i) {
      t.push_back(trace.times[i]);
      d.push_back(std::abs(trace.ens_mean[i] - trace.ens_mean[0]));
    }
    const double slope = fit_power_law(t, d).slope;
    ok = ok && std::abs(slope - 1.0) <= 0.05;
    detail << "; (iii) exponent = " << fmt(slope);
  }
  return {ok, detail.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Byte-identical trace.csv for 1, 2 and 8 workers.
Outcome criterion9() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "qgens_acceptance_repro";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cfg = root / "config.json";
  std::ofstream(cfg) << R"({
  "model": {"nu": 1, "r": 0.1, "beta": 1, "nonlinearity": "full"},
  "spectrum": {"c_mu": 1, "mu_exp": 1, "theta": 0.1},
  "sim": {"M": 8, "dt": 0.001, "T": 0.2, "n_outputs": 21, "n_paths": 24, "master_seed": 99,
          "initial_condition": {"kind": "gaussian", "values": [1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,
            1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1]}}
})";
  std::vector<std::string> csvs;
  std::ostringstream sink;
  for (unsigned threads : {1u, 2u, 8u}) {
    CommandOptions o;
    o.config_path = cfg;
    o.out_dir = root / ("t" + std::to_string(threads));
    o.threads = threads;
    o.out = &sink;
    o.err = &sink;
    if (cmd_simulate(o) != kExitOk) return {false, "simulate failed: " + sink.str()};
    csvs.push_back(slurp(*o.out_dir / "trace.csv"));
  }
  fs::remove_all(root);
  const bool ok = !csvs[0].empty() && csvs[0] == csvs[1] && csvs[0] == csvs[2];
  return {ok, std::to_string(csvs[0].size()) + " bytes, identical = " + (ok ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--threads" && i + 1 < argc) {
      g_threads = static_cast<unsigned>(std::max(1, std::atoi(argv[++i])));
    } else if (a == "--only" && i + 1 < argc) {
      only.insert(std::atoi(argv[++i]));
    } else {
      std::cerr << "usage: qgens_acceptance [--threads N] [--only K]...\n";
      return 2;
    }
  }
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4}, {5, criterion5},
      {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9}};
  int failed = 0;
  for (const auto& [id, fn] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "  ["
              << fmt(secs) << " s]" << std::endl;
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
