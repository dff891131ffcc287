#include "qgens/rng.hpp"

namespace qgens {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_key(std::uint64_t master_seed, std::uint64_t path_index, Substream stream) {
  std::uint64_t key = mix64(master_seed);
  key = mix64(key ^ mix64(path_index + 0x632be59bd9b4e019ULL));
  key = mix64(key ^ static_cast<std::uint64_t>(stream));
  return key;
}

NormalStream::NormalStream(std::uint64_t master_seed, std::uint64_t path_index, Substream stream)
    : engine_(stream_key(master_seed, path_index, stream)) {}

void NormalStream::fill(std::span<double> out) {
  for (double& v : out) {
    v = dist_(engine_);
  }
}

}  // namespace qgens
