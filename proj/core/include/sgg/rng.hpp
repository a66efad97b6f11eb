#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace sgg {

// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t x);

// Folds a list of integers into one seed. Every stochastic stream in the
// project is keyed this way, e.g. derive_seed({master, phase, step, image}).
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts);

// FNV-1a over bytes; stable across platforms, unlike std::hash.
std::uint64_t fnv1a64(std::string_view bytes);

// mt19937_64 with distribution code owned here, so outputs do not depend on
// the standard library's implementation-defined distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller; one value per call.
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace sgg
