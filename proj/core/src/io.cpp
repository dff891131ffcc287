#include "qgens/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <system_error>

#include "json.hpp"

#ifndef QGENS_VERSION
#define QGENS_VERSION "0.0.0"
#endif

namespace qgens {

std::string version() { return QGENS_VERSION; }

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot rename onto " + path.string() + ": " + ec.message());
  }
}

std::string trace_to_csv(const EnstrophyTrace& trace) {
  std::string out = "time,ens_mean,ens_se,wa_var_analytic\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out += format_number(trace.times[i]);
    out += ',';
    out += format_number(trace.ens_mean[i]);
    out += ',';
    out += format_number(trace.ens_se[i]);
    out += ',';
    out += i < trace.wa_var_analytic.size() ? format_number(trace.wa_var_analytic[i]) : "";
    out += '\n';
  }
  return out;
}

std::string trace_to_json(const EnstrophyTrace& trace) {
  nlohmann::ordered_json doc;
  doc["n_paths"] = trace.n_paths;
  doc["times"] = trace.times;
  doc["ens_mean"] = trace.ens_mean;
  doc["ens_se"] = trace.ens_se;
  doc["wa_half_mean"] = trace.wa_half_mean;
  doc["wa_half_se"] = trace.wa_half_se;
  doc["residual_mean"] = trace.residual_mean;
  doc["residual_se"] = trace.residual_se;
  doc["wa_var_analytic"] = trace.wa_var_analytic;
  return doc.dump(2) + "\n";
}

std::string trajectories_to_csv(std::span<const PathTrajectory> trajectories) {
  std::size_t modes = 0;
  for (const auto& p : trajectories) {
    for (const auto& r : p.records) {
      if (!r.omega) throw std::invalid_argument("trajectories were recorded without fields");
      modes = static_cast<std::size_t>(r.omega->coeffs.size());
    }
  }
  std::string out = "path,time";
  for (std::size_t k = 1; k <= modes; ++k) out += ",c" + std::to_string(k);
  out += '\n';
  for (const auto& p : trajectories) {
    for (const auto& r : p.records) {
      out += std::to_string(p.path_index);
      out += ',';
      out += format_number(r.time);
      for (Eigen::Index k = 0; k < r.omega->coeffs.size(); ++k) {
        out += ',';
        out += format_number(r.omega->coeffs[k]);
      }
      out += '\n';
    }
  }
  return out;
}

std::string bounds_to_csv(const EnstrophyTrace& trace, std::span<const BoundReport> reports) {
  std::string out = "time,ens_mean,ens_se";
  for (const auto& r : reports) {
    out += ",envelope_";
    out += to_string(r.envelope.kind);
    if (r.envelope.kind == EnvelopeKind::theorem1) {
      const auto it = r.envelope.parameters.find("alpha");
      if (it != r.envelope.parameters.end()) out += "_alpha" + format_number(it->second);
    }
  }
  out += ",analytic_wa_var\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out += format_number(trace.times[i]);
    out += ',';
    out += format_number(trace.ens_mean[i]);
    out += ',';
    out += format_number(trace.ens_se[i]);
    for (const auto& r : reports) {
      out += ',';
      if (i < r.envelope.values.size()) out += format_number(r.envelope.values[i]);
    }
    out += ',';
    if (i < trace.wa_var_analytic.size()) out += format_number(trace.wa_var_analytic[i]);
    out += '\n';
  }
  return out;
}

}  // namespace qgens
