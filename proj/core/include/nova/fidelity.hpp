#pragma once

// Pseudo-source synthesis: a filler clip is pasted onto the target through a
// moving binary mask, x~_t = m_t * y_t + (1 - m_t) * x_t.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "nova/manifest.hpp"
#include "nova/rng.hpp"
#include "nova/video.hpp"

namespace nova::fidelity {

enum class ShapeKind { rectangle, ellipse, polygon };

const char* to_string(ShapeKind kind) noexcept;

struct MaskShapeSpec {
  ShapeKind kind = ShapeKind::rectangle;
  /// Nominal diameter as a fraction of min(H, W); in (0, 1).
  double base_size = 0.3;
  /// Width/height ratio of the base shape.
  double aspect = 1.0;
  /// Unit-circle vertices in counter-clockwise order (polygon only).
  std::vector<std::array<double, 2>> vertices;

  void validate() const;

  static MaskShapeSpec rectangle(double base_size, double aspect = 1.0);
  static MaskShapeSpec ellipse(double base_size, double aspect = 1.0);
  /// Convex polygon inscribed in the unit circle at the given angles (radians).
  static MaskShapeSpec polygon(double base_size, std::vector<double> angles, double aspect = 1.0);
};

struct MaskMotionState {
  std::array<double, 2> position{};  // pixels, (x, y)
  std::array<double, 2> velocity{};  // pixels per frame
  double rotation = 0.0;             // radians
  double spin = 0.0;                 // radians per frame
  double scale = 1.0;
};

struct HalfExtents {
  double x;
  double y;
};

/// Half widths of the axis-aligned bounding box of the transformed shape.
HalfExtents bounding_half_extents(const MaskShapeSpec& spec, const MaskMotionState& state, int height, int width);

struct MaskRaster {
  Image mask;
  std::size_t area = 0;
  bool degenerate() const noexcept { return area == 0; }
};

/// Binary mask of `spec` placed at `state`, tested at pixel centers and
/// clipped to the frame. An empty result is flagged via degenerate().
MaskRaster rasterize_mask(const MaskShapeSpec& spec, const MaskMotionState& state, int height, int width);

/// Advances position by velocity and rotation by spin. When the bounding box
/// would leave the frame along an axis while moving outward, that velocity
/// component is negated and the position re-advanced.
MaskMotionState step_motion(const MaskShapeSpec& spec, const MaskMotionState& state, int height, int width);

/// Reflect-mode index into a clip of length L: 0,1,..,L-1,L-2,..,1,0,1,...
int pingpong_index(long long t, int length);

enum class ShapeChoice { random, rectangle, ellipse, polygon };

struct FidelityConfig {
  std::uint64_t seed = 0;
  ShapeChoice shape = ShapeChoice::random;
  double size_min = 0.15, size_max = 0.45;
  double aspect_min = 0.6, aspect_max = 1.6;
  /// Speed in pixels per frame for a 64-pixel-wide frame; scaled by W / 64.
  double speed_min = 0.5, speed_max = 3.0;
  double spin_min = -0.05, spin_max = 0.05;
  double scale_min = 1.0, scale_max = 1.0;
  int vertices_min = 3, vertices_max = 8;
  int workers = 1;

  void validate() const;
  double max_speed(int width) const noexcept { return speed_max * width / 64.0; }
};

struct PseudoSource {
  Video video;
  MaskSequence masks;
  MaskShapeSpec shape;
  std::vector<MaskMotionState> states;
  Manifest log;
};

/// x~_t = m_t * y_t + (1 - m_t) * x_t with the mask broadcast over channels.
Image composite(const Image& target, const Image& filler, const Image& mask);

/// Resamples a filler clip to the target's raster and channel count.
Video conform_filler(const Video& filler, int height, int width, int channels);

PseudoSource synth_pseudo_source(const Video& target, std::span<const Video> pool, const FidelityConfig& cfg,
                                 const Rng& rng);
PseudoSource synth_pseudo_source(const Video& target, std::span<const Video> pool, const FidelityConfig& cfg);

}  // namespace nova::fidelity
