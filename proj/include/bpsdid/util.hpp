#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bpsdid {

// Numerical failure (singular shift, inner-solve breakdown, rank collapse).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Contract violation on inputs (dimension mismatch, bad ranges).
class InvalidArgument : public std::invalid_argument {
 public:
  explicit InvalidArgument(const std::string& what) : std::invalid_argument(what) {}
};

// SplitMix64-seeded xorshift generator. std::mt19937 plus the standard
// distributions leave the produced stream implementation-defined; traces must
// be byte-identical for a given seed, so the mapping to doubles is fixed here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // splitmix warmup so small seeds do not start in a low-entropy state
    next_u64();
    next_u64();
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [-1, 1]
  double next_symmetric() { return 2.0 * next_double() - 1.0; }

 private:
  std::uint64_t state_;
};

// FNV-1a over raw bytes; used for pencil fingerprints and node-map hashes.
inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace bpsdid
