#pragma once

#include <cstdint>

#include "nova/denoiser/model.hpp"

namespace nova::denoiser {

struct SampleConfig {
  /// Number of denoising steps, evenly strided over the schedule.
  int steps = 50;
  std::uint64_t seed = 0;
  ForwardOptions options{};
  /// Project each x0 estimate back onto the valid pixel range.
  bool clip_x0 = true;
};

/// Ancestral sampling from pure noise, conditioned on the reference (sparse
/// branch) and source (dense branch). Videos longer than the model's clip
/// length are processed in windows of that length with stride length-1;
/// shared boundary frames are averaged. Throws ErrorKind::numeric on
/// non-finite parameters or outputs.
Video sample(const Video& reference, const Video& source, const DenoiserParams<float>& params,
             const NoiseSchedule& schedule, const SampleConfig& cfg);

/// Start frames of the temporal windows used for a video of `length` frames.
std::vector<int> window_starts(int length, int window);

}  // namespace nova::denoiser
