#pragma once

// Keyed random streams: every (master_seed, path, substream) triple maps to an
// independent engine, so a path's draws never depend on scheduling.

#include <cstdint>
#include <random>
#include <span>

namespace qgens {

enum class Substream : std::uint64_t {
  forcing = 1,
  initial_condition = 2,
};

/// SplitMix64 finaliser.
std::uint64_t mix64(std::uint64_t x);

/// Deterministic key for one stream; distinct triples give unrelated keys.
std::uint64_t stream_key(std::uint64_t master_seed, std::uint64_t path_index, Substream stream);

class NormalStream {
 public:
  NormalStream(std::uint64_t master_seed, std::uint64_t path_index, Substream stream);

  double next() { return dist_(engine_); }
  void fill(std::span<double> out);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> dist_{0.0, 1.0};
};

}  // namespace qgens
