#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "qgens/commands.hpp"
#include "qgens/config.hpp"

using namespace qgens;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("qgens_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  fs::path write_config(const std::string& name, const std::string& body) {
    const fs::path p = root_ / name;
    std::ofstream(p) << body;
    return p;
  }

  int run(int (*cmd)(const CommandOptions&), const fs::path& config, const std::string& out,
          unsigned threads = 1) {
    CommandOptions o;
    o.config_path = config;
    o.out_dir = root_ / out;
    o.threads = threads;
    out_.str("");
    err_.str("");
    o.out = &out_;
    o.err = &err_;
    return cmd(o);
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  static nlohmann::json json_of(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

  fs::path root_;
  std::ostringstream out_;
  std::ostringstream err_;
};

const char* kLinear = R"({
  "model": {"nu": 1, "r": 0.1, "beta": 0, "nonlinearity": "linearized"},
  "spectrum": {"c_mu": 1, "mu_exp": 2, "theta": 0.1},
  "sim": {"M": 4, "dt": 0.001, "T": 1, "n_outputs": 11, "n_paths": 10, "master_seed": 1}
})";

}  // namespace

TEST_F(Cli, SimulateWritesArtifacts) {
  const auto cfg = write_config("c.json", kLinear);
  ASSERT_EQ(run(cmd_simulate, cfg, "a"), kExitOk) << err_.str();
  const std::string csv = slurp(root_ / "a" / "trace.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "time,ens_mean,ens_se,wa_var_analytic");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 12);
  const auto manifest = json_of(root_ / "a" / "manifest.json");
  EXPECT_EQ(manifest["master_seed"], 1);
  EXPECT_EQ(manifest["config_hash"].get<std::string>().size(), 16u);
  EXPECT_TRUE(manifest.contains("version"));
  EXPECT_TRUE(manifest.contains("wall_time_s"));
  EXPECT_TRUE(fs::exists(root_ / "a" / "trace.json"));
  EXPECT_TRUE(fs::exists(root_ / "a" / "config.json"));
}

TEST_F(Cli, SimulateIsReproducible) {
  const auto cfg = write_config("c.json", kLinear);
  ASSERT_EQ(run(cmd_simulate, cfg, "a", 1), kExitOk);
  ASSERT_EQ(run(cmd_simulate, cfg, "b", 3), kExitOk);
  EXPECT_EQ(slurp(root_ / "a" / "trace.csv"), slurp(root_ / "b" / "trace.csv"));
  // the stored normalized config reproduces the run
  ASSERT_EQ(run(cmd_simulate, root_ / "a" / "config.json", "c"), kExitOk);
  EXPECT_EQ(slurp(root_ / "a" / "trace.csv"), slurp(root_ / "c" / "trace.csv"));
  // the hash identifies the stored normalized config
  EXPECT_EQ(json_of(root_ / "a" / "manifest.json")["config_hash"], fnv1a_hex(slurp(root_ / "a" / "config.json")));
}

TEST_F(Cli, TrajectoryDump) {
  const auto cfg = write_config("c.json", R"({"sim": {"M": 2, "T": 0.01, "n_outputs": 3, "n_paths": 2},
                                              "io": {"write_trajectories": true}})");
  ASSERT_EQ(run(cmd_simulate, cfg, "a"), kExitOk) << err_.str();
  const std::string csv = slurp(root_ / "a" / "trajectories.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "path,time,c1,c2,c3,c4");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}

TEST_F(Cli, ConfigErrorsExitTwo) {
  const auto bad_theta = write_config("t.json", R"({"spectrum": {"c_mu": 1, "mu_exp": 2, "theta": 1.5}})");
  EXPECT_EQ(run(cmd_simulate, bad_theta, "a"), kExitConfig);
  EXPECT_NE(err_.str().find("spectrum.theta"), std::string::npos);
  EXPECT_EQ(run(cmd_simulate, root_ / "missing.json", "a"), kExitConfig);
}

TEST_F(Cli, BlowupExitsThree) {
  std::string values = "[";
  for (int i = 0; i < 16; ++i) values += std::string(i ? "," : "") + "1e120";
  values += "]";
  const auto cfg = write_config("b.json", R"({"sim": {"M": 4, "T": 0.01, "n_outputs": 2, "n_paths": 2,
      "initial_condition": {"kind": "explicit", "values": )" + values + "}}}");
  EXPECT_EQ(run(cmd_simulate, cfg, "a"), kExitBlowup);
  EXPECT_NE(err_.str().find("path 0"), std::string::npos);
  EXPECT_NE(err_.str().find("path 1"), std::string::npos);
}

TEST_F(Cli, VerifyLinear) {
  const auto good = write_config("g.json", R"({
    "model": {"nonlinearity": "linearized"},
    "sim": {"M": 8, "dt": 0.001, "T": 0.2, "n_outputs": 5, "n_paths": 1000, "master_seed": 3}})");
  EXPECT_EQ(run(cmd_verify_linear, good, "g"), kExitOk) << err_.str();
  const auto report = json_of(root_ / "g" / "linear_report.json");
  EXPECT_EQ(report["verdict"], "pass");
  EXPECT_EQ(report["rows"].size(), 5u);

  const auto scaled = write_config("s.json", R"({
    "model": {"nonlinearity": "linearized"},
    "sim": {"M": 8, "dt": 0.001, "T": 0.2, "n_outputs": 5, "n_paths": 1000, "master_seed": 3},
    "debug": {"noise_scale": 2}})");
  EXPECT_EQ(run(cmd_verify_linear, scaled, "s"), kExitOracleMismatch);
  EXPECT_NE(err_.str().find("worst z-score"), std::string::npos);

  const auto one = write_config("o.json", R"({"model": {"nonlinearity": "linearized"}, "sim": {"M": 4, "n_paths": 1}})");
  EXPECT_EQ(run(cmd_verify_linear, one, "o"), kExitConfig);
  const auto nonlinear = write_config("n.json", R"({"sim": {"M": 4, "n_paths": 4}})");
  EXPECT_EQ(run(cmd_verify_linear, nonlinear, "n"), kExitConfig);
}

TEST_F(Cli, BoundsTraceClass) {
  const auto cfg = write_config("b.json", R"({
    "sim": {"M": 8, "dt": 0.001, "T": 1, "n_outputs": 21, "n_paths": 100, "master_seed": 5},
    "analysis": {"gamma_offset": 0.1}})");
  EXPECT_EQ(run(cmd_bounds, cfg, "b"), kExitOk) << err_.str() << out_.str();
  const auto report = json_of(root_ / "b" / "bounds_report.json");
  EXPECT_EQ(report["checks"]["trace_class"]["verdict"], "pass");
  const std::string csv = slurp(root_ / "b" / "bounds.csv");
  const std::string header = csv.substr(0, csv.find('\n'));
  EXPECT_EQ(header.substr(0, 39), "time,ens_mean,ens_se,envelope_trace_cla");
  EXPECT_NE(header.find("analytic_wa_var"), std::string::npos);
}

TEST_F(Cli, BoundsNonTraceClass) {
  const auto cfg = write_config("b.json", R"({
    "spectrum": {"c_mu": 1, "mu_exp": 0.8, "theta": 0.1},
    "sim": {"M": 6, "dt": 0.001, "T": 0.5, "n_outputs": 11, "n_paths": 20}})");
  const int code = run(cmd_bounds, cfg, "b");
  EXPECT_TRUE(code == kExitOk || code == kExitBoundViolation) << err_.str();
  const auto report = json_of(root_ / "b" / "bounds_report.json");
  EXPECT_EQ(report["checks"]["trace_class"]["verdict"], "not_applicable");
  EXPECT_NE(report["checks"]["theorem2a"]["verdict"], "not_applicable");
  EXPECT_EQ(report["checks"]["theorem2b"]["verdict"], "not_applicable");
}

TEST_F(Cli, BoundsRejectsGammaBelowThreshold) {
  const auto cfg = write_config("b.json", R"({"sim": {"M": 4}, "analysis": {"gamma": -25}})");
  EXPECT_EQ(run(cmd_bounds, cfg, "b"), kExitConfig);
  EXPECT_NE(err_.str().find("analysis.gamma"), std::string::npos);
}

TEST_F(Cli, HolderSynthetic) {
  const auto cfg = write_config("h.json", R"({
    "sim": {"M": 2, "dt": 0.001, "T": 1, "n_outputs": 1001},
    "analysis": {"holder": {"t0": 0.1, "t1": 1, "lags": [0.001, 0.002, 0.005, 0.01, 0.02, 0.05]}},
    "debug": {"synthetic_trace": "sqrt"}})");
  EXPECT_EQ(run(cmd_holder, cfg, "h"), kExitOk) << err_.str();
  const auto report = json_of(root_ / "h" / "holder_report.json");
  EXPECT_EQ(report["verdict"], "pass");
  EXPECT_GT(report["exponent"].get<double>(), 0.2);

  const auto narrow = write_config("n.json", R"({
    "sim": {"M": 2, "dt": 0.001, "T": 1, "n_outputs": 1001},
    "analysis": {"holder": {"t0": 0.1, "t1": 1, "lags": [0.001, 0.002]}},
    "debug": {"synthetic_trace": "sqrt"}})");
  EXPECT_EQ(run(cmd_holder, narrow, "n"), kExitConfig);
}

TEST_F(Cli, AsymptoticsLinearZeroStart) {
  const auto cfg = write_config("a.json", R"({
    "model": {"r": 0, "nonlinearity": "linearized"},
    "spectrum": {"c_mu": 1, "mu_exp": 0.5, "theta": 0.1},
    "sim": {"M": 6, "dt": 1e-5, "T": 0.01, "geometric_outputs": {"t_min": 1e-5, "count": 7}, "n_paths": 40}})");
  EXPECT_EQ(run(cmd_asymptotics, cfg, "a"), kExitOk) << err_.str();
  const auto report = json_of(root_ / "a" / "asymptotics_report.json");
  EXPECT_EQ(report["verdict"], "pass");
  for (const auto& r : report["ratio_empirical"]) EXPECT_EQ(r.get<double>(), 1.0);
  EXPECT_EQ(report["lemma4"]["exact"], true);
}
