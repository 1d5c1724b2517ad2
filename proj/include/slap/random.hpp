#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace slap {

using Rng = std::mt19937_64;

// Stream tags keep substreams of different subsystems apart.
enum class Stream : std::uint64_t {
  truth = 1,
  offline_edge = 2,
  online_edge = 3,
  rollout = 4,
  sampling = 5,
  lazy = 6,
  insertion = 7,
  bootstrap = 8,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent substream seed from a master seed and a key path.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
  return Rng(derive_seed(master, keys));
}

inline std::uint64_t key(Stream s) { return static_cast<std::uint64_t>(s); }

inline std::uint64_t key(std::int64_t v) { return static_cast<std::uint64_t>(v); }

}  // namespace slap
