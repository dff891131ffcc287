#pragma once

// Artifact formatting and atomic file output.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qgens/dynamics.hpp"
#include "qgens/lab.hpp"

namespace qgens {

/// Library version baked in at build time.
std::string version();

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

/// Writes to a temporary sibling, then renames over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

/// Header `time,ens_mean,ens_se,wa_var_analytic`.
std::string trace_to_csv(const EnstrophyTrace& trace);

std::string trace_to_json(const EnstrophyTrace& trace);

/// One row per (path, time): path,time,c1,...,cK in rank order.
std::string trajectories_to_csv(std::span<const PathTrajectory> trajectories);

/// Columns time, ens_mean, ens_se, envelope_<kind>..., analytic_wa_var.
std::string bounds_to_csv(const EnstrophyTrace& trace, std::span<const BoundReport> reports);

}  // namespace qgens
