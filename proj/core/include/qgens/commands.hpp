#pragma once

// Subcommand implementations behind the qgens tool. Each returns a process
// exit code and writes its artifacts into the output directory.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

namespace qgens {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitBlowup = 3,
  kExitOracleMismatch = 4,
  kExitBoundViolation = 5,
  kExitRegularityFail = 6,
};

struct CommandOptions {
  std::filesystem::path config_path;
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::size_t> paths;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::ostream* out = nullptr;  // progress and summaries; std::cout when null
  std::ostream* err = nullptr;  // diagnostics; std::cerr when null
};

int cmd_simulate(const CommandOptions& options);
int cmd_verify_linear(const CommandOptions& options);
int cmd_bounds(const CommandOptions& options);
int cmd_holder(const CommandOptions& options);
int cmd_asymptotics(const CommandOptions& options);

}  // namespace qgens
