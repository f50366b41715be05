#pragma once

// Procedural toy clips: flat-colored shapes bouncing over a panning textured
// background. Every layer is rendered analytically so ground truth for
// add/remove edits is known exactly.

#include <array>
#include <string>
#include <vector>

#include "nova/manifest.hpp"
#include "nova/rng.hpp"
#include "nova/video.hpp"

namespace nova::shapes {

struct ClipSpec {
  int height = 16;
  int width = 16;
  int frames = 17;
  int channels = 3;
  int shapes_min = 1;
  int shapes_max = 3;
  /// Shape diameter as a fraction of min(H, W).
  double shape_size_min = 0.2;
  double shape_size_max = 0.4;
  /// Pixels per frame, scaled by W / 16.
  double shape_speed_max = 1.0;
  double background_speed_min = 0.3;
  double background_speed_max = 1.0;

  void validate() const;
};

struct Sprite {
  bool disc = true;
  double radius = 2.0;
  double x = 0, y = 0, vx = 0, vy = 0;
  std::array<float, 3> color{};
};

struct Background {
  struct Grating {
    double fx, fy, phase;
    std::array<double, 3> amplitude;
  };
  std::array<double, 3> base{};
  std::vector<Grating> gratings;
  bool sinusoidal = false;
  double vx = 0, vy = 0;         // linear pan, pixels per frame
  double ax = 0, ay = 0, omega = 0;  // sinusoidal pan

  std::array<double, 2> offset(int t) const;
  Image render(int height, int width, int channels, int t) const;
};

struct Clip {
  Video video;
  /// The same clip with no sprites.
  Video background;
  /// Union of sprite coverage per frame (binary).
  MaskSequence objects;
  Manifest log;
};

/// Sprite position at frame t, with specular bounces off the frame edges.
std::array<double, 2> sprite_position(const Sprite& s, int height, int width, int t);
Image sprite_mask(const Sprite& s, int height, int width, int t);

Background random_background(const ClipSpec& spec, Rng& rng);
Sprite random_sprite(const ClipSpec& spec, Rng& rng);

/// Renders background plus sprites, painting sprites in order.
Video render(const Background& bg, const std::vector<Sprite>& sprites, const ClipSpec& spec);

Clip generate_clip(const ClipSpec& spec, Rng rng);
std::vector<Video> generate_dataset(const ClipSpec& spec, int count, std::uint64_t seed);

enum class EditKind { add, remove, recolor };

/// A local edit with ground truth known by construction.
struct EditCase {
  EditKind kind = EditKind::add;
  Video source;
  Video truth;
  MaskSequence mask;
  std::string prompt;
};

/// add: a new sprite appears; remove: one sprite disappears (truth re-rendered
/// without it); recolor: one sprite's hue changes.
EditCase make_edit_case(const ClipSpec& spec, EditKind kind, Rng rng);

std::string hex_color(const std::array<float, 3>& rgb);

}  // namespace nova::shapes
