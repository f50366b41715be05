#include "nova/denoiser/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nova/error.hpp"

namespace nova::denoiser {

NoiseSchedule::NoiseSchedule(std::vector<double> alpha_bar) : alpha_bar_(std::move(alpha_bar)) {
  require(!alpha_bar_.empty(), "noise schedule: empty");
  for (std::size_t i = 0; i < alpha_bar_.size(); ++i) {
    require(alpha_bar_[i] > 0.0 && alpha_bar_[i] <= 1.0, "noise schedule: alpha_bar must lie in (0, 1]");
    if (i > 0) require(alpha_bar_[i] < alpha_bar_[i - 1], "noise schedule: alpha_bar must be strictly decreasing");
  }
}

NoiseSchedule NoiseSchedule::cosine(int steps, double offset, double max_beta) {
  require(steps >= 1, "noise schedule: steps must be positive");
  const auto f = [&](double u) {
    const double c = std::cos((u + offset) / (1.0 + offset) * std::numbers::pi / 2.0);
    return c * c;
  };
  std::vector<double> ab(static_cast<std::size_t>(steps));
  double prev = 1.0;
  for (int t = 0; t < steps; ++t) {
    const double beta = std::min(1.0 - f((t + 1.0) / steps) / f(t / static_cast<double>(steps)), max_beta);
    prev *= 1.0 - beta;
    ab[static_cast<std::size_t>(t)] = prev;
  }
  return NoiseSchedule(std::move(ab));
}

std::vector<int> NoiseSchedule::sampling_steps(int count) const {
  require(count >= 1 && count <= steps(), "noise schedule: sampling step count outside [1, steps]");
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    // Spread from the noisiest step down to t = 0.
    const double u = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    out.push_back(static_cast<int>(std::lround((steps() - 1) * (1.0 - u))));
  }
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace nova::denoiser
