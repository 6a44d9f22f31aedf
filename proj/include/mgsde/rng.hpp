#pragma once

#include <cstdint>
#include <random>

namespace mgsde {

// Seedable generator addressed by a (seed, stream) pair. Distinct streams of
// the same seed are independent replicas; the mapping is deterministic so any
// run can be regenerated from its manifest.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64() { return engine_(); }
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return normal_(engine_); }
  std::size_t index(std::size_t n);  // uniform on {0, ..., n-1}
  bool coin() { return (engine_() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

// Derives a child seed from a parent seed and a tag; used to give every
// (seed, N, replicate) cell of a sweep its own table and noise streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

}  // namespace mgsde
