#pragma once

#include <cstdint>
#include <random>

namespace stepdad {

/// Seeded random stream. Child streams are derived deterministically from
/// (seed, index) so batched rollouts can be drawn in any order, or in
/// parallel, and still reproduce bit for bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  /// Independent child stream; does not advance this stream.
  Rng substream(std::uint64_t index) const;

  double uniform();  // [0, 1)
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double gamma(double shape);
  double beta(double a, double b);
  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to mix seeds and stream indices.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace stepdad
