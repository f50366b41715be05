#include "nova/moving_shapes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "nova/error.hpp"
#include "nova/image_ops.hpp"

namespace nova::shapes {
namespace {

double reflect(double u, double span) {
  if (span <= 0.0) return 0.0;
  const double period = 2.0 * span;
  double r = std::fmod(u, period);
  if (r < 0.0) r += period;
  return r <= span ? r : period - r;
}

// Sprite colors sit on the 8-bit grid so a "#rrggbb" prompt reproduces them exactly.
std::array<float, 3> to_8bit(const std::array<double, 3>& rgb) {
  std::array<float, 3> out{};
  for (std::size_t c = 0; c < 3; ++c)
    out[c] = static_cast<float>(std::lround(std::clamp(rgb[c], 0.0, 1.0) * 255.0)) / 255.0f;
  return out;
}

std::array<float, 3> saturated_color(Rng& rng) {
  const Hsv hsv{rng.uniform(0.0, 360.0), rng.uniform(0.65, 1.0), rng.uniform(0.65, 1.0)};
  return to_8bit(hsv_to_rgb(hsv));
}

void paint(Image& img, const Image& mask, const std::array<float, 3>& color) {
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      if (mask.at(y, x) == 0.0f) continue;
      if (img.channels() == 3) {
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = color[static_cast<std::size_t>(c)];
      } else {
        img.at(y, x) = 0.299f * color[0] + 0.587f * color[1] + 0.114f * color[2];
      }
    }
}

Image union_mask(const std::vector<Sprite>& sprites, int h, int w, int t) {
  Image m(h, w, 1);
  for (const auto& s : sprites) {
    const Image sm = sprite_mask(s, h, w, t);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = std::max(m.data()[i], sm.data()[i]);
  }
  return m;
}

}  // namespace

void ClipSpec::validate() const {
  require(height >= 4 && width >= 4, "clip spec: frames must be at least 4x4");
  require(frames >= 2, "clip spec: need at least two frames");
  require(channels == 1 || channels == 3, "clip spec: channels must be 1 or 3");
  require(shapes_min >= 0 && shapes_min <= shapes_max, "clip spec: invalid shape count range");
  require(shape_size_min > 0.0 && shape_size_min <= shape_size_max && shape_size_max < 1.0,
          "clip spec: shape size range must lie in (0, 1)");
  require(shape_speed_max >= 0.0, "clip spec: shape speed must be non-negative");
  require(background_speed_min >= 0.0 && background_speed_min <= background_speed_max,
          "clip spec: invalid background speed range");
}

std::array<double, 2> Background::offset(int t) const {
  if (sinusoidal) return {ax * std::sin(omega * t), ay * std::sin(omega * t)};
  return {vx * t, vy * t};
}

Image Background::render(int height, int width, int channels, int t) const {
  Image img(height, width, 3);
  const auto [ox, oy] = offset(t);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double px = x + 0.5 + ox, py = y + 0.5 + oy;
      std::array<double, 3> v = base;
      for (const auto& g : gratings) {
        const double s = std::sin(2.0 * std::numbers::pi * (g.fx * px + g.fy * py) + g.phase);
        for (std::size_t c = 0; c < 3; ++c) v[c] += g.amplitude[c] * s;
      }
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>(std::clamp(v[static_cast<std::size_t>(c)], 0.0, 1.0));
    }
  return channels == 3 ? img : to_gray(img);
}

std::array<double, 2> sprite_position(const Sprite& s, int height, int width, int t) {
  const double sx = std::max(0.0, width - 2.0 * s.radius);
  const double sy = std::max(0.0, height - 2.0 * s.radius);
  return {s.radius + reflect(s.x - s.radius + s.vx * t, sx), s.radius + reflect(s.y - s.radius + s.vy * t, sy)};
}

Image sprite_mask(const Sprite& s, int height, int width, int t) {
  const auto [cx, cy] = sprite_position(s, height, width, t);
  Image m(height, width, 1);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      const bool in = s.disc ? dx * dx + dy * dy <= s.radius * s.radius
                             : std::fabs(dx) <= s.radius && std::fabs(dy) <= s.radius;
      if (in) m.at(y, x) = 1.0f;
    }
  return m;
}

Background random_background(const ClipSpec& spec, Rng& rng) {
  Background bg;
  for (double& b : bg.base) b = rng.uniform(0.3, 0.7);
  const int n = 2 + static_cast<int>(rng.below(2));
  for (int i = 0; i < n; ++i) {
    const double freq = rng.uniform(0.08, 0.25);
    const double angle = rng.uniform(0.0, std::numbers::pi);
    Background::Grating g{freq * std::cos(angle), freq * std::sin(angle), rng.uniform(0.0, 2.0 * std::numbers::pi), {}};
    for (double& a : g.amplitude) a = rng.uniform(0.04, 0.14);
    bg.gratings.push_back(g);
  }
  const double scale = spec.width / 16.0;
  const double speed = rng.uniform(spec.background_speed_min, spec.background_speed_max) * scale;
  const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
  bg.sinusoidal = rng.uniform() < 0.5;
  if (bg.sinusoidal) {
    bg.omega = rng.uniform(0.15, 0.4);
    // Peak speed of a*sin(omega t) is a*omega.
    bg.ax = speed / bg.omega * std::cos(heading);
    bg.ay = speed / bg.omega * std::sin(heading);
  } else {
    bg.vx = speed * std::cos(heading);
    bg.vy = speed * std::sin(heading);
  }
  return bg;
}

Sprite random_sprite(const ClipSpec& spec, Rng& rng) {
  Sprite s;
  const int side = std::min(spec.height, spec.width);
  s.disc = rng.uniform() < 0.5;
  s.radius = 0.5 * rng.uniform(spec.shape_size_min, spec.shape_size_max) * side;
  s.x = rng.uniform(s.radius, spec.width - s.radius);
  s.y = rng.uniform(s.radius, spec.height - s.radius);
  const double speed = rng.uniform(0.0, spec.shape_speed_max) * spec.width / 16.0;
  const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
  s.vx = speed * std::cos(heading);
  s.vy = speed * std::sin(heading);
  s.color = saturated_color(rng);
  return s;
}

Video render(const Background& bg, const std::vector<Sprite>& sprites, const ClipSpec& spec) {
  std::vector<Image> frames;
  frames.reserve(static_cast<std::size_t>(spec.frames));
  for (int t = 0; t < spec.frames; ++t) {
    Image img = bg.render(spec.height, spec.width, spec.channels, t);
    for (const auto& s : sprites) paint(img, sprite_mask(s, spec.height, spec.width, t), s.color);
    frames.push_back(std::move(img));
  }
  return Video(std::move(frames));
}

Clip generate_clip(const ClipSpec& spec, Rng rng) {
  spec.validate();
  const Background bg = random_background(spec, rng);
  const int count = spec.shapes_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.shapes_max - spec.shapes_min + 1)));
  std::vector<Sprite> sprites;
  for (int i = 0; i < count; ++i) sprites.push_back(random_sprite(spec, rng));

  std::vector<Image> masks;
  for (int t = 0; t < spec.frames; ++t) masks.push_back(union_mask(sprites, spec.height, spec.width, t));
  Clip clip{render(bg, sprites, spec), render(bg, {}, spec), MaskSequence(std::move(masks)), {}};
  clip.log.set("sprites", count);
  clip.log.set("background.sinusoidal", bg.sinusoidal);
  return clip;
}

std::vector<Video> generate_dataset(const ClipSpec& spec, int count, std::uint64_t seed) {
  require(count >= 1, "generate_dataset: count must be positive");
  std::vector<Video> clips;
  clips.reserve(static_cast<std::size_t>(count));
  const Rng root(seed);
  for (int i = 0; i < count; ++i) clips.push_back(generate_clip(spec, root.fork(Stage::dataset, static_cast<std::uint64_t>(i))).video);
  return clips;
}

std::string hex_color(const std::array<float, 3>& rgb) {
  char buf[16];
  const auto q = [](float v) { return static_cast<int>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)); };
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", q(rgb[0]), q(rgb[1]), q(rgb[2]));
  return buf;
}

EditCase make_edit_case(const ClipSpec& spec, EditKind kind, Rng rng) {
  spec.validate();
  const Background bg = random_background(spec, rng);
  ClipSpec others = spec;
  const int count = spec.shapes_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.shapes_max - spec.shapes_min + 1)));
  std::vector<Sprite> sprites;
  for (int i = 0; i < count; ++i) sprites.push_back(random_sprite(others, rng));
  Sprite target = random_sprite(spec, rng);

  std::vector<Sprite> with = sprites;
  with.push_back(target);
  std::vector<Image> masks;
  for (int t = 0; t < spec.frames; ++t) masks.push_back(sprite_mask(target, spec.height, spec.width, t));

  EditCase ec;
  ec.kind = kind;
  ec.mask = MaskSequence(std::move(masks));
  switch (kind) {
    case EditKind::add:
      ec.source = render(bg, sprites, spec);
      ec.truth = render(bg, with, spec);
      ec.prompt = "add:" + hex_color(target.color);
      break;
    case EditKind::remove:
      ec.source = render(bg, with, spec);
      ec.truth = render(bg, sprites, spec);
      ec.prompt = "remove";
      break;
    case EditKind::recolor: {
      ec.source = render(bg, with, spec);
      const Hsv hsv = rgb_to_hsv(target.color[0], target.color[1], target.color[2]);
      const double hue = std::fmod(hsv.h + rng.uniform(90.0, 270.0), 360.0);
      const auto rgb = hsv_to_rgb({hue, hsv.s, hsv.v});
      Sprite recolored = target;
      recolored.color = to_8bit(rgb);
      std::vector<Sprite> edited = sprites;
      edited.push_back(recolored);
      ec.truth = render(bg, edited, spec);
      ec.prompt = "recolor:" + hex_color(recolored.color);
      break;
    }
  }
  return ec;
}

}  // namespace nova::shapes
