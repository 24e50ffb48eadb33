#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace celldeploy {

/// SplitMix64 finalizer. Used both as a seed expander and as the counter
/// hash behind the frozen shadowing field.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent seed for a named consumer ("init", "ou", ...)
/// so that adding draws in one consumer never shifts another.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

/// Portable random source. std::mt19937_64 output is fixed by the standard;
/// the distribution transforms are done here so results do not depend on the
/// standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Maps a 64-bit hash to a uniform value in the open interval (0, 1).
double hash_to_open_unit(std::uint64_t h) noexcept;

}  // namespace celldeploy
