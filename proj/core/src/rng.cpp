#include "nova/rng.hpp"

#include <cmath>
#include <numbers>

#include "nova/error.hpp"

namespace nova {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double to_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return static_cast<double>(bits) * 0x1.0p-53;
}

}  // namespace

std::uint64_t stream_id(Stage stage, std::uint64_t index) noexcept {
  return splitmix64((static_cast<std::uint64_t>(stage) << 48) ^ index);
}

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) noexcept {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

Rng Rng::fork(std::uint64_t sub) const noexcept {
  return Rng(seed_, splitmix64(stream_ ^ splitmix64(sub + 0x632BE59BD9B4E019ull)));
}

Rng Rng::fork(Stage stage, std::uint64_t index) const noexcept { return fork(stream_id(stage, index)); }

std::array<std::uint32_t, 4> Rng::next_block() noexcept {
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
      static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                            static_cast<std::uint32_t>(seed_ >> 32)};
  ++counter_;
  return philox4x32(ctr, key);
}

std::uint64_t Rng::next_u64() noexcept {
  const auto b = next_block();
  return (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
}

double Rng::uniform() noexcept {
  const auto b = next_block();
  return to_unit(b[0], b[1]);
}

double Rng::uniform(double lo, double hi) {
  require(lo <= hi, "rng uniform: lo > hi");
  if (lo == hi) {
    ++counter_;
    return lo;
  }
  const double v = lo + (hi - lo) * uniform();
  return v < hi ? v : std::nextafter(hi, lo);
}

std::uint64_t Rng::below(std::uint64_t n) {
  require(n > 0, "rng below: n must be positive");
  // Rejection sampling keeps the draw unbiased for every n.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  for (;;) {
    const std::uint64_t v = next_u64();
    if (v < limit) return v % n;
  }
}

double Rng::normal() noexcept {
  const auto b = next_block();
  const double u1 = 1.0 - to_unit(b[0], b[1]);  // (0, 1]
  const double u2 = to_unit(b[2], b[3]);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

bool Rng::bernoulli(double p) {
  require(p >= 0.0 && p <= 1.0, "rng bernoulli: p outside [0,1]");
  return uniform() < p;
}

}  // namespace nova
