#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace dart {

/// Seedable deterministic random stream.
///
/// Child streams are derived from the root seed (not from generator state),
/// so the set of streams a run uses depends only on the master seed and the
/// stream path, never on draw order. Rollouts can therefore execute serially
/// or in parallel with bit-identical results.
///
/// All transforms (uniform, normal, bounded int) are implemented here on top
/// of std::mt19937_64, whose output sequence is pinned by the standard; we do
/// not use std::*_distribution because their algorithms are
/// implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  /// Raw 64-bit draw.
  uint64_t next();

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform01();

  /// Standard normal via Box-Muller (second value cached).
  double normal();

  /// Unbiased integer in [0, n). n must be >= 1.
  uint64_t uniform_below(uint64_t n);

  Eigen::VectorXd normal_vector(int dim);

  /// Child stream keyed by (root seed, id...). Pure: does not consume state.
  Rng stream(uint64_t a) const;
  Rng stream(uint64_t a, uint64_t b) const;
  Rng stream(uint64_t a, uint64_t b, uint64_t c) const;

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// splitmix64 finalizer; used to mix seeds and stream ids.
uint64_t mix_seed(uint64_t seed, uint64_t id);

/// Stable 64-bit hash of a string (FNV-1a), for keying streams by name.
uint64_t hash_name(const char* name);

namespace stream_tag {
// Fixed purpose tags so every random consumer in a run owns its own stream.
inline constexpr uint64_t kDemo = 0x01;
inline constexpr uint64_t kEval = 0x02;
inline constexpr uint64_t kBaseline = 0x03;
inline constexpr uint64_t kSubsample = 0x04;
inline constexpr uint64_t kWishart = 0x05;
}  // namespace stream_tag

}  // namespace dart
