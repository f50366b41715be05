#pragma once

// Degraded reference synthesis: sample keyframes, corrupt every keyframe
// except frame 0, and linearly interpolate between neighbouring keyframes.

#include <map>
#include <vector>

#include "nova/image_ops.hpp"
#include "nova/manifest.hpp"
#include "nova/rng.hpp"
#include "nova/video.hpp"

namespace nova::anchor {

enum class DegradeOp { affine, blur };

struct DegradationConfig {
  double p_geometric = 0.5;
  double p_appearance = 0.5;
  double zoom_min = 0.9, zoom_max = 1.1;
  double stretch_min = 0.95, stretch_max = 1.05;
  double rotation_deg = 3.0;
  double sigma_min = 0.5, sigma_max = 2.0;
  /// Blob area as a fraction of the frame.
  double blob_min = 0.10, blob_max = 0.40;
  /// Width in pixels of the linear ramp at the blob boundary.
  double blob_edge = 2.0;
  std::vector<DegradeOp> ops = {DegradeOp::affine, DegradeOp::blur};
  int workers = 1;

  void validate() const;
  bool enabled(DegradeOp op) const noexcept;
};

struct ZoomStretch {
  double zoom = 1.0;
  double stretch_x = 1.0;
  double stretch_y = 1.0;
  double rotation = 0.0;  // radians
};

struct Blob {
  double center_x = 0, center_y = 0;
  double radius_x = 1, radius_y = 1;
  double angle = 0;
};

struct DegradationLog {
  int index = 0;
  bool geometric = false;
  ZoomStretch warp;
  bool appearance = false;
  double sigma = 0.0;
  Blob blob;

  void write(Manifest& m, const std::string& prefix) const;
};

struct DegradedKeyframe {
  Image frame;
  DegradationLog log;
};

/// Inverse map (output -> source) of a zoom-stretch-rotation about the frame center.
Affine2 zoom_stretch_map(int height, int width, const ZoomStretch& warp);

/// Soft elliptical mask: 1 inside, 0 outside, linear ramp of `edge` pixels.
Image blob_mask(int height, int width, const Blob& blob, double edge);

/// (1 - b) * x + b * Blur_sigma(x).
Image blur_blend(const Image& frame, const Image& blob, double sigma);

/// {0, T} plus n_interior distinct indices drawn uniformly from (0, T).
KeyframeSet sample_keyframes(int last_index, int n_interior, Rng& rng);

DegradedKeyframe degrade_keyframe(const Image& frame, const DegradationConfig& cfg, Rng rng);

/// Piecewise-linear video through the given keyframes. Keys must include
/// 0 and T; keyframe slots are copied bitwise.
Video interpolate_reference(const std::map<int, Image>& keyframes, int last_index, int workers = 1);

struct KeyframeMode {
  enum class Kind { random, fixed } kind = Kind::random;
  int value = 0;  // n_interior for random, interval for fixed

  static KeyframeMode random(int n_interior) { return {Kind::random, n_interior}; }
  static KeyframeMode fixed(int interval) { return {Kind::fixed, interval}; }
};

struct DegradedReference {
  Video video;
  KeyframeSet keyframes;
  std::map<int, Image> anchors;
  std::vector<DegradationLog> log;

  Manifest manifest() const;
};

DegradedReference build_degraded_reference(const Video& target, const DegradationConfig& cfg, KeyframeMode mode,
                                           const Rng& rng);

}  // namespace nova::anchor
