#pragma once

#include <vector>

namespace nova::denoiser {

/// Cumulative signal coefficients alpha_bar_t for t = 0..steps-1, strictly
/// decreasing from close to 1 to close to 0.
class NoiseSchedule {
 public:
  explicit NoiseSchedule(std::vector<double> alpha_bar);

  /// Cosine schedule with offset s; per-step betas are capped at max_beta.
  static NoiseSchedule cosine(int steps, double offset = 0.008, double max_beta = 0.999);

  int steps() const noexcept { return static_cast<int>(alpha_bar_.size()); }
  double alpha_bar(int t) const { return alpha_bar_.at(static_cast<std::size_t>(t)); }
  const std::vector<double>& alpha_bars() const noexcept { return alpha_bar_; }

  /// Evenly spaced descending timesteps from steps-1 down to 0, `count` long.
  std::vector<int> sampling_steps(int count) const;

 private:
  std::vector<double> alpha_bar_;
};

}  // namespace nova::denoiser
