#pragma once

#include <array>
#include <cstdint>

namespace nova {

/// Pipeline stages that own a family of random streams. A stream id is derived
/// from (stage, index) so that every frame or keyframe draws from its own
/// sequence regardless of how work is scheduled.
enum class Stage : std::uint32_t {
  init = 1,
  fidelity_setup = 2,
  fidelity_frame = 3,
  anchor_keyframes = 4,
  anchor_degrade = 5,
  dataset = 6,
  train_step = 7,
  sample_noise = 8,
  editor = 9,
  fixture = 10,
};

std::uint64_t stream_id(Stage stage, std::uint64_t index = 0) noexcept;

/// Philox4x32-10 block. Exposed for testing against published vectors.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// Counter-based generator. Every draw is a pure function of
/// (seed, stream, counter), so results do not depend on platform or thread
/// count. Copying an Rng copies its position; fork() derives an independent
/// stream instead of sharing one mutably.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0, std::uint64_t counter = 0) noexcept
      : seed_(seed), stream_(stream), counter_(counter) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t counter() const noexcept { return counter_; }

  Rng fork(std::uint64_t sub) const noexcept;
  Rng fork(Stage stage, std::uint64_t index = 0) const noexcept;

  std::array<std::uint32_t, 4> next_block() noexcept;
  std::uint64_t next_u64() noexcept;

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform in [lo, hi); returns lo when lo == hi. Throws when lo > hi.
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller, one block per draw.
  double normal() noexcept;
  bool bernoulli(double p);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_;
};

}  // namespace nova
