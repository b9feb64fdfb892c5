#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace densecap {

// splitmix64 finalizer; used to derive independent streams from one seed.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);

// Seed for a named purpose ("corpus", "epn.init", "rl.sample", ...).
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                          std::uint64_t index = 0);

// Portable draws on top of mt19937_64: the std distributions are
// implementation-defined, which would break byte-identical outputs across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t master, std::string_view purpose, std::uint64_t index = 0)
      : engine_(derive_seed(master, purpose, index)) {}

  std::uint64_t next() { return engine_(); }
  // [0, 1)
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Inclusive integer range.
  int uniform_int(int lo, int hi);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace densecap
