#pragma once

// Run configuration: strict JSON schema, validation at load time and a
// normalized form that serializes back to itself.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qgens/dynamics.hpp"
#include "qgens/lab.hpp"
#include "qgens/noise.hpp"

namespace qgens {

/// Schema or precondition violation. `key` is the dotted path of the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct SpectrumConfig {
  std::optional<double> c_mu;
  std::optional<double> mu_exp;
  std::optional<std::vector<double>> mu_sq_list;
  double theta = 0.1;
};

struct HolderConfig {
  double t0 = 0.0;
  double t1 = 0.0;
  std::vector<double> lags;
  double rho = 0.05;
};

struct AnalysisConfig {
  std::vector<std::string> bounds{"trace_class", "theorem2a", "theorem2b", "lemma1", "theorem1"};
  double gamma = 0.0;
  double poincare_constant = 0.0;
  std::vector<double> alpha_grid{1.0, 10.0, 100.0, 1000.0, 10000.0};
  double split_fraction = 0.5;
  HolderConfig holder;
  AsymptoticsOptions asymptotics;
  std::optional<double> mu_tilde;  // power-law case of the global envelope
};

enum class SyntheticTrace { none, sqrt, linear };

struct RunConfig {
  ModelParams model;
  SpectrumConfig spectrum;
  SimConfig sim;
  AnalysisConfig analysis;
  std::filesystem::path out_dir = "qgens_out";
  bool write_trajectories = false;
  SyntheticTrace synthetic_trace = SyntheticTrace::none;
};

/// Parses and normalizes a config document. Missing entries take defaults,
/// derived entries (output grid, gamma, Hoelder window) are made explicit.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);

/// Normalized JSON text; parse_config(serialize_config(c)) reproduces c.
std::string serialize_config(const RunConfig& config);

/// Re-runs the load-time checks, e.g. after command-line overrides.
void validate_config(RunConfig& config);

NoiseSpectrum make_spectrum(const RunConfig& config);

/// 64-bit FNV-1a of a byte string, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace qgens
