#include "qgens/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace qgens {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Walks one JSON object, remembering which keys were read so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string key(const std::string& name) const { return path_.empty() ? name : path_ + "." + name; }

  bool has(const std::string& name) const { return node_.contains(name); }

  const json* find(const std::string& name) {
    seen_.insert(name);
    auto it = node_.find(name);
    return it == node_.end() ? nullptr : &*it;
  }

  double number(const std::string& name, double fallback) {
    const json* v = find(name);
    if (!v) return fallback;
    return as_number(*v, key(name));
  }

  std::optional<double> optional_number(const std::string& name) {
    const json* v = find(name);
    if (!v) return std::nullopt;
    return as_number(*v, key(name));
  }

  bool boolean(const std::string& name, bool fallback) {
    const json* v = find(name);
    if (!v) return fallback;
    if (!v->is_boolean()) throw ConfigError(key(name), "expected true or false");
    return v->get<bool>();
  }

  std::string string(const std::string& name, const std::string& fallback) {
    const json* v = find(name);
    if (!v) return fallback;
    if (!v->is_string()) throw ConfigError(key(name), "expected a string");
    return v->get<std::string>();
  }

  std::int64_t integer(const std::string& name, std::int64_t fallback) {
    const json* v = find(name);
    if (!v) return fallback;
    if (!v->is_number_integer()) throw ConfigError(key(name), "expected an integer");
    return v->get<std::int64_t>();
  }

  std::optional<std::vector<double>> numbers(const std::string& name) {
    const json* v = find(name);
    if (!v) return std::nullopt;
    if (!v->is_array()) throw ConfigError(key(name), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      out.push_back(as_number((*v)[i], key(name) + "[" + std::to_string(i) + "]"));
    }
    return out;
  }

  std::optional<Section> child(const std::string& name) {
    const json* v = find(name);
    if (!v) return std::nullopt;
    return Section(*v, key(name));
  }

  void finish() const {
    for (const auto& item : node_.items()) {
      if (!seen_.contains(item.key())) throw ConfigError(key(item.key()), "unknown key");
    }
  }

 private:
  static double as_number(const json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError(where, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(where, "expected a finite number");
    return d;
  }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<double> uniform_grid(double horizon, std::int64_t count) {
  std::vector<double> out;
  for (std::int64_t j = 0; j < count; ++j) {
    out.push_back(horizon * static_cast<double>(j) / static_cast<double>(count - 1));
  }
  return out;
}

std::vector<double> geometric_grid(double t_min, double horizon, std::int64_t count) {
  std::vector<double> out{0.0};
  const double ratio = std::log(horizon / t_min);
  for (std::int64_t j = 0; j < count; ++j) {
    const double frac = count == 1 ? 1.0 : static_cast<double>(j) / static_cast<double>(count - 1);
    out.push_back(t_min * std::exp(ratio * frac));
  }
  return out;
}

std::vector<double> default_lags(const std::vector<double>& times, double t0, double t1) {
  double base = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < times.size(); ++i) base = std::min(base, times[i] - times[i - 1]);
  std::vector<double> lags;
  if (!std::isfinite(base)) return lags;
  for (double decade = 1.0; decade * base <= t1 - t0 + 1e-12; decade *= 10.0) {
    for (double f : {1.0, 2.0, 3.0, 5.0}) {
      const double lag = f * decade * base;
      if (lag <= t1 - t0 + 1e-12 * std::max(1.0, t1)) lags.push_back(lag);
    }
  }
  return lags;
}

const char* ic_kind_name(InitialCondition::Kind kind) {
  switch (kind) {
    case InitialCondition::Kind::zero: return "zero";
    case InitialCondition::Kind::explicit_coeffs: return "explicit";
    case InitialCondition::Kind::gaussian: return "gaussian";
  }
  return "zero";
}

const std::set<std::string>& known_bounds() {
  static const std::set<std::string> names{"trace_class", "theorem2a", "theorem2b", "lemma1",
                                           "theorem1"};
  return names;
}

// Maps invalid_argument messages from module validators onto config keys.
template <typename F>
void with_key(const std::string& key, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, e.what());
  }
}

}  // namespace

void validate_config(RunConfig& c) {
  with_key("model", [&] { c.model.validate(); });

  const auto& s = c.spectrum;
  if (!(s.theta > 0.0 && s.theta < 1.0)) throw ConfigError("spectrum.theta", "must lie in (0, 1)");
  const bool power_law = s.c_mu.has_value() || s.mu_exp.has_value();
  if (power_law == s.mu_sq_list.has_value()) {
    throw ConfigError("spectrum", "give either c_mu and mu_exp, or mu_sq_list");
  }
  if (power_law) {
    if (!s.c_mu) throw ConfigError("spectrum.c_mu", "missing");
    if (!s.mu_exp) throw ConfigError("spectrum.mu_exp", "missing");
    if (*s.c_mu < 0.0) throw ConfigError("spectrum.c_mu", "must be non-negative");
    if (*s.mu_exp <= s.theta) {
      throw ConfigError("spectrum.mu_exp", "must exceed theta for a summable forcing");
    }
  }

  auto& sim = c.sim;
  if (sim.truncation < 1) throw ConfigError("sim.M", "must be >= 1");
  if (!(sim.dt > 0.0)) throw ConfigError("sim.dt", "must be positive");
  if (!(sim.horizon > 0.0)) throw ConfigError("sim.T", "must be positive");
  const double steps = sim.horizon / sim.dt;
  if (std::abs(steps - std::round(steps)) > 1e-6) {
    throw ConfigError("sim.T", "must be a multiple of sim.dt");
  }
  if (sim.n_paths < 2) throw ConfigError("sim.n_paths", "at least 2 paths are needed for a standard error");
  const auto modes = static_cast<std::size_t>(sim.truncation) * static_cast<std::size_t>(sim.truncation);
  if (s.mu_sq_list && s.mu_sq_list->size() != modes) {
    throw ConfigError("spectrum.mu_sq_list", "must have M^2 = " + std::to_string(modes) + " entries");
  }
  if (s.mu_sq_list) {
    for (double v : *s.mu_sq_list) {
      if (!(v >= 0.0)) throw ConfigError("spectrum.mu_sq_list", "entries must be non-negative");
    }
  }
  if (sim.initial.kind != InitialCondition::Kind::zero && sim.initial.values.size() != modes) {
    throw ConfigError("sim.initial_condition.values",
                      "must have M^2 = " + std::to_string(modes) + " entries");
  }
  with_key("sim.output_times", [&] { sim.validate(); });

  auto& a = c.analysis;
  if (!(a.poincare_constant > 0.0)) {
    throw ConfigError("analysis.poincare_constant", "must be positive");
  }
  const double threshold =
      gamma_threshold(c.model.viscosity, c.model.ekman, c.model.beta, a.poincare_constant);
  if (!(a.gamma > threshold)) {
    throw ConfigError("analysis.gamma", "must exceed gamma_threshold = " + std::to_string(threshold));
  }
  for (const auto& b : a.bounds) {
    if (!known_bounds().contains(b)) throw ConfigError("analysis.bounds", "unknown bound '" + b + "'");
  }
  for (double alpha : a.alpha_grid) {
    if (!(alpha >= 0.0)) throw ConfigError("analysis.alpha_grid", "entries must be non-negative");
  }
  if (!(a.split_fraction > 0.0 && a.split_fraction < 1.0)) {
    throw ConfigError("analysis.split_fraction", "must lie in (0, 1)");
  }
  const auto& h = a.holder;
  if (!(h.t0 > 0.0 && h.t1 >= h.t0 && h.t1 <= sim.horizon * (1.0 + 1e-12))) {
    throw ConfigError("analysis.holder", "window must satisfy 0 < t0 <= t1 <= T");
  }
  for (double lag : h.lags) {
    if (!(lag > 0.0)) throw ConfigError("analysis.holder.lags", "lags must be positive");
  }
  if (!(h.rho > 0.0 && h.rho < 0.25)) throw ConfigError("analysis.holder.rho", "must lie in (0, 1/4)");
  const auto& as = a.asymptotics;
  if (!(as.delta > 0.0)) throw ConfigError("analysis.asymptotics.delta", "must be positive");
  if (!(as.gamma_reg > 0.0)) throw ConfigError("analysis.asymptotics.gamma_reg", "must be positive");
  if (!(as.rho > 0.0 && as.rho < 0.25)) {
    throw ConfigError("analysis.asymptotics.rho", "must lie in (0, 1/4)");
  }
  if (!(as.window_max > 0.0)) throw ConfigError("analysis.asymptotics.window_max", "must be positive");
  if (a.mu_tilde && s.mu_exp && !(*a.mu_tilde > 0.0 && *a.mu_tilde < *s.mu_exp)) {
    throw ConfigError("analysis.theorem2.mu_tilde", "must lie in (0, mu_exp)");
  }
  if (c.out_dir.empty()) throw ConfigError("io.out_dir", "must not be empty");
}

RunConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  RunConfig c;
  c.sim.n_paths = 100;
  Section root(doc, "");

  if (auto m = root.child("model")) {
    c.model.viscosity = m->number("nu", c.model.viscosity);
    c.model.ekman = m->number("r", c.model.ekman);
    c.model.beta = m->number("beta", c.model.beta);
    const std::string nl = m->string("nonlinearity", "full");
    if (nl == "full") {
      c.model.nonlinearity = Nonlinearity::full;
    } else if (nl == "linearized") {
      c.model.nonlinearity = Nonlinearity::linearized;
    } else {
      throw ConfigError("model.nonlinearity", "expected \"full\" or \"linearized\"");
    }
    c.model.beta_term = m->boolean("beta_term", true);
    m->finish();
  }

  if (auto s = root.child("spectrum")) {
    c.spectrum.c_mu = s->optional_number("c_mu");
    c.spectrum.mu_exp = s->optional_number("mu_exp");
    c.spectrum.mu_sq_list = s->numbers("mu_sq_list");
    c.spectrum.theta = s->number("theta", c.spectrum.theta);
    s->finish();
  } else {
    c.spectrum.c_mu = 1.0;
    c.spectrum.mu_exp = 2.0;
  }

  std::optional<std::vector<double>> explicit_times;
  std::optional<std::int64_t> n_outputs;
  std::optional<std::pair<double, std::int64_t>> geometric;
  if (auto s = root.child("sim")) {
    const auto m = s->integer("M", c.sim.truncation);
    if (m < 1 || m > 4096) throw ConfigError("sim.M", "must lie in [1, 4096]");
    c.sim.truncation = static_cast<int>(m);
    c.sim.dt = s->number("dt", c.sim.dt);
    c.sim.horizon = s->number("T", c.sim.horizon);
    explicit_times = s->numbers("output_times");
    if (s->has("n_outputs")) n_outputs = s->integer("n_outputs", 11);
    if (auto g = s->child("geometric_outputs")) {
      const double t_min = g->number("t_min", 1e-4);
      const auto count = g->integer("count", 20);
      g->finish();
      if (!(t_min > 0.0)) throw ConfigError("sim.geometric_outputs.t_min", "must be positive");
      if (count < 1) throw ConfigError("sim.geometric_outputs.count", "must be >= 1");
      geometric = std::make_pair(t_min, count);
    }
    const auto paths = s->integer("n_paths", static_cast<std::int64_t>(c.sim.n_paths));
    if (paths < 0) throw ConfigError("sim.n_paths", "must be non-negative");
    c.sim.n_paths = static_cast<std::size_t>(paths);
    if (const json* seed = s->find("master_seed")) {
      if (!seed->is_number_integer() || (seed->is_number_integer() && !seed->is_number_unsigned() &&
                                         seed->get<std::int64_t>() < 0)) {
        throw ConfigError("sim.master_seed", "expected a non-negative integer");
      }
      c.sim.master_seed = seed->get<std::uint64_t>();
    }
    if (auto ic = s->child("initial_condition")) {
      const std::string kind = ic->string("kind", "zero");
      if (kind == "zero") {
        c.sim.initial.kind = InitialCondition::Kind::zero;
      } else if (kind == "explicit") {
        c.sim.initial.kind = InitialCondition::Kind::explicit_coeffs;
      } else if (kind == "gaussian") {
        c.sim.initial.kind = InitialCondition::Kind::gaussian;
      } else {
        throw ConfigError("sim.initial_condition.kind", "expected zero, explicit or gaussian");
      }
      c.sim.initial.values = ic->numbers("values").value_or(std::vector<double>{});
      ic->finish();
    }
    c.sim.record_fields = s->boolean("record_fields", false);
    c.sim.record_sup_norm = s->boolean("record_sup_norm", true);
    s->finish();
  }
  const int given = static_cast<int>(explicit_times.has_value()) +
                    static_cast<int>(n_outputs.has_value()) + static_cast<int>(geometric.has_value());
  if (given > 1) {
    throw ConfigError("sim.output_times", "give only one of output_times, n_outputs, geometric_outputs");
  }
  if (!(c.sim.dt > 0.0)) throw ConfigError("sim.dt", "must be positive");
  if (!(c.sim.horizon > 0.0)) throw ConfigError("sim.T", "must be positive");
  if (explicit_times) {
    c.sim.output_times = *explicit_times;
    std::vector<double> sorted = c.sim.output_times;
    snap_output_times(sorted, c.sim.dt);
    c.sim.output_times = sorted;
  } else if (geometric) {
    if (geometric->first >= c.sim.horizon) {
      throw ConfigError("sim.geometric_outputs.t_min", "must be smaller than T");
    }
    c.sim.output_times = geometric_grid(geometric->first, c.sim.horizon, geometric->second);
    snap_output_times(c.sim.output_times, c.sim.dt);
  } else {
    const std::int64_t count = n_outputs.value_or(11);
    if (count < 2) throw ConfigError("sim.n_outputs", "must be >= 2");
    c.sim.output_times = uniform_grid(c.sim.horizon, count);
    snap_output_times(c.sim.output_times, c.sim.dt);
  }

  std::optional<double> gamma;
  std::optional<double> gamma_offset;
  c.analysis.poincare_constant = dirichlet_poincare_constant();
  std::optional<double> t0;
  std::optional<double> t1;
  std::optional<std::vector<double>> lags;
  std::optional<std::string> asym_mode;
  std::optional<double> delta;
  if (auto a = root.child("analysis")) {
    if (const json* b = a->find("bounds")) {
      if (!b->is_array()) throw ConfigError("analysis.bounds", "expected an array of names");
      c.analysis.bounds.clear();
      for (const auto& item : *b) {
        if (!item.is_string()) throw ConfigError("analysis.bounds", "expected an array of names");
        c.analysis.bounds.push_back(item.get<std::string>());
      }
    }
    gamma = a->optional_number("gamma");
    gamma_offset = a->optional_number("gamma_offset");
    c.analysis.poincare_constant = a->number("poincare_constant", c.analysis.poincare_constant);
    if (auto grid = a->numbers("alpha_grid")) c.analysis.alpha_grid = *grid;
    c.analysis.split_fraction = a->number("split_fraction", c.analysis.split_fraction);
    if (auto h = a->child("holder")) {
      t0 = h->optional_number("t0");
      t1 = h->optional_number("t1");
      lags = h->numbers("lags");
      c.analysis.holder.rho = h->number("rho", c.analysis.holder.rho);
      h->finish();
    }
    if (auto s = a->child("asymptotics")) {
      if (s->has("mode")) asym_mode = s->string("mode", "");
      delta = s->optional_number("delta");
      c.analysis.asymptotics.gamma_reg = s->number("gamma_reg", c.analysis.asymptotics.gamma_reg);
      c.analysis.asymptotics.rho = s->number("rho", c.analysis.asymptotics.rho);
      c.analysis.asymptotics.window_max = s->number("window_max", c.analysis.asymptotics.window_max);
      s->finish();
    }
    if (auto t = a->child("theorem2")) {
      c.analysis.mu_tilde = t->optional_number("mu_tilde");
      t->finish();
    }
    a->finish();
  }
  if (gamma && gamma_offset) {
    throw ConfigError("analysis.gamma", "give only one of gamma and gamma_offset");
  }
  if (gamma) {
    c.analysis.gamma = *gamma;
  } else {
    if (!(c.analysis.poincare_constant > 0.0)) {
      throw ConfigError("analysis.poincare_constant", "must be positive");
    }
    c.analysis.gamma = gamma_threshold(c.model.viscosity, c.model.ekman, c.model.beta,
                                       c.analysis.poincare_constant) +
                       gamma_offset.value_or(0.1);
  }

  const auto& times = c.sim.output_times;
  double first_positive = c.sim.horizon;
  for (double t : times) {
    if (t > 0.0) {
      first_positive = t;
      break;
    }
  }
  c.analysis.holder.t0 = t0.value_or(first_positive);
  c.analysis.holder.t1 = t1.value_or(times.empty() ? c.sim.horizon : times.back());
  c.analysis.holder.lags =
      lags.value_or(default_lags(times, c.analysis.holder.t0, c.analysis.holder.t1));

  if (!asym_mode) {
    c.analysis.asymptotics.mode = c.sim.initial.kind == InitialCondition::Kind::zero
                                      ? AsymptoticsMode::zero_initial
                                      : AsymptoticsMode::general;
  } else if (*asym_mode == "general") {
    c.analysis.asymptotics.mode = AsymptoticsMode::general;
  } else if (*asym_mode == "zero_initial") {
    c.analysis.asymptotics.mode = AsymptoticsMode::zero_initial;
  } else {
    throw ConfigError("analysis.asymptotics.mode", "expected general or zero_initial");
  }
  c.analysis.asymptotics.delta =
      delta.value_or(c.spectrum.mu_exp ? std::min(*c.spectrum.mu_exp, 1.0) : 1.0);
  if (!c.analysis.mu_tilde && c.spectrum.mu_exp) {
    c.analysis.mu_tilde = std::min(*c.spectrum.mu_exp, 1.0) - c.spectrum.theta;
  }

  if (auto io = root.child("io")) {
    c.out_dir = io->string("out_dir", c.out_dir.string());
    c.write_trajectories = io->boolean("write_trajectories", false);
    io->finish();
  }
  if (c.write_trajectories) c.sim.record_fields = true;

  if (auto d = root.child("debug")) {
    c.sim.noise_scale = d->number("noise_scale", 1.0);
    if (!(c.sim.noise_scale >= 0.0)) throw ConfigError("debug.noise_scale", "must be non-negative");
    const std::string synth = d->string("synthetic_trace", "none");
    if (synth == "none") {
      c.synthetic_trace = SyntheticTrace::none;
    } else if (synth == "sqrt") {
      c.synthetic_trace = SyntheticTrace::sqrt;
    } else if (synth == "linear") {
      c.synthetic_trace = SyntheticTrace::linear;
    } else {
      throw ConfigError("debug.synthetic_trace", "expected none, sqrt or linear");
    }
    d->finish();
  }
  root.finish();

  validate_config(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("<file>", "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const RunConfig& c) {
  ordered_json doc;
  doc["model"] = {{"nu", c.model.viscosity},
                  {"r", c.model.ekman},
                  {"beta", c.model.beta},
                  {"nonlinearity", c.model.nonlinearity == Nonlinearity::full ? "full" : "linearized"},
                  {"beta_term", c.model.beta_term}};

  ordered_json spectrum = ordered_json::object();
  if (c.spectrum.mu_sq_list) {
    spectrum["mu_sq_list"] = *c.spectrum.mu_sq_list;
  } else {
    spectrum["c_mu"] = c.spectrum.c_mu.value_or(1.0);
    spectrum["mu_exp"] = c.spectrum.mu_exp.value_or(2.0);
  }
  spectrum["theta"] = c.spectrum.theta;
  doc["spectrum"] = spectrum;

  ordered_json ic = {{"kind", ic_kind_name(c.sim.initial.kind)}};
  if (c.sim.initial.kind != InitialCondition::Kind::zero) ic["values"] = c.sim.initial.values;
  doc["sim"] = {{"M", c.sim.truncation},
                {"dt", c.sim.dt},
                {"T", c.sim.horizon},
                {"output_times", c.sim.output_times},
                {"n_paths", c.sim.n_paths},
                {"master_seed", c.sim.master_seed},
                {"initial_condition", ic},
                {"record_fields", c.sim.record_fields},
                {"record_sup_norm", c.sim.record_sup_norm}};

  ordered_json analysis;
  analysis["bounds"] = c.analysis.bounds;
  analysis["gamma"] = c.analysis.gamma;
  analysis["poincare_constant"] = c.analysis.poincare_constant;
  analysis["alpha_grid"] = c.analysis.alpha_grid;
  analysis["split_fraction"] = c.analysis.split_fraction;
  analysis["holder"] = {{"t0", c.analysis.holder.t0},
                        {"t1", c.analysis.holder.t1},
                        {"lags", c.analysis.holder.lags},
                        {"rho", c.analysis.holder.rho}};
  const auto& as = c.analysis.asymptotics;
  analysis["asymptotics"] = {
      {"mode", as.mode == AsymptoticsMode::general ? "general" : "zero_initial"},
      {"delta", as.delta},
      {"gamma_reg", as.gamma_reg},
      {"rho", as.rho},
      {"window_max", as.window_max}};
  if (c.analysis.mu_tilde) analysis["theorem2"] = {{"mu_tilde", *c.analysis.mu_tilde}};
  doc["analysis"] = analysis;

  doc["io"] = {{"out_dir", c.out_dir.generic_string()}, {"write_trajectories", c.write_trajectories}};
  const char* synth = c.synthetic_trace == SyntheticTrace::sqrt     ? "sqrt"
                      : c.synthetic_trace == SyntheticTrace::linear ? "linear"
                                                                    : "none";
  doc["debug"] = {{"noise_scale", c.sim.noise_scale}, {"synthetic_trace", synth}};
  return doc.dump(2) + "\n";
}

NoiseSpectrum make_spectrum(const RunConfig& c) {
  const auto modes = static_cast<std::size_t>(c.sim.truncation) * static_cast<std::size_t>(c.sim.truncation);
  if (c.spectrum.mu_sq_list) return spectrum_from_list(*c.spectrum.mu_sq_list, c.spectrum.theta);
  return build_spectrum(modes, c.spectrum.c_mu.value_or(1.0), c.spectrum.mu_exp.value_or(2.0),
                        c.spectrum.theta);
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace qgens
