#include "nova/editors.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "nova/error.hpp"
#include "nova/image_ops.hpp"
#include "nova/rng.hpp"

namespace nova::inference {
namespace {

void check_call(const EditCall& call) {
  if (call.mask)
    require(call.mask->height() == call.frame.height() && call.mask->width() == call.frame.width() &&
                call.mask->channels() == 1,
            "editor: mask does not match the frame");
  if (call.reference) require(call.reference->same_shape(call.frame), "editor: reference does not match the frame");
  if (call.reference_mask)
    require(call.reference_mask->same_raster(call.frame) && call.reference_mask->channels() == 1,
            "editor: reference mask does not match the frame");
}

double mask_at(const EditCall& call, int y, int x) { return call.mask ? call.mask->at(y, x) : 1.0; }

// Hue of the saturated reference pixel nearest to `target`.
std::optional<double> nearest_reference_hue(const Image& ref, double target) {
  std::optional<double> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (int y = 0; y < ref.height(); ++y)
    for (int x = 0; x < ref.width(); ++x) {
      const Hsv hsv = rgb_to_hsv(ref.at(y, x, 0), ref.at(y, x, 1), ref.at(y, x, 2));
      if (hsv.s < 0.2 || hsv.v < 0.1) continue;
      const double d = std::abs(hue_difference(hsv.h, target));
      if (d < best_d) {
        best_d = d;
        best = hsv.h;
      }
    }
  return best;
}

// Circular mean hue of saturated pixels inside the mask.
std::optional<double> masked_mean_hue(const Image& img, const Image& mask) {
  double sx = 0.0, sy = 0.0;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      if (mask.at(y, x) < 0.5f) continue;
      const Hsv hsv = rgb_to_hsv(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
      if (hsv.s < 0.2 || hsv.v < 0.1) continue;
      const double a = hsv.h * std::numbers::pi / 180.0;
      sx += std::cos(a);
      sy += std::sin(a);
    }
  if (sx == 0.0 && sy == 0.0) return std::nullopt;
  return std::atan2(sy, sx) * 180.0 / std::numbers::pi;
}

}  // namespace

std::array<float, 3> parse_hex_color(const std::string& hex) {
  std::string h = hex;
  if (!h.empty() && h[0] == '#') h.erase(0, 1);
  if (h.size() != 6 || h.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos)
    fail(ErrorKind::precondition, "expected a color like #rrggbb, got '" + hex + "'");
  std::array<float, 3> rgb{};
  for (int c = 0; c < 3; ++c)
    rgb[static_cast<std::size_t>(c)] = static_cast<float>(std::stoi(h.substr(static_cast<std::size_t>(2 * c), 2), nullptr, 16)) / 255.0f;
  return rgb;
}

Prompt parse_prompt(const std::string& prompt) {
  Prompt p;
  const auto colon = prompt.find(':');
  p.verb = prompt.substr(0, colon);
  if (colon != std::string::npos) p.color = parse_hex_color(prompt.substr(colon + 1));
  if (p.verb != "recolor" && p.verb != "add" && p.verb != "remove")
    fail(ErrorKind::precondition, "unknown prompt verb '" + p.verb + "'");
  if ((p.verb == "remove") == p.color.has_value())
    fail(ErrorKind::precondition, "prompt '" + prompt + "': add and recolor take a color, remove takes none");
  return p;
}

Image RecolorEditor::edit(const EditCall& call) const {
  check_call(call);
  require(call.frame.channels() == 3, "recolor editor needs RGB frames");
  const Prompt p = parse_prompt(call.prompt);
  if (p.verb != "recolor" || !p.color) fail(ErrorKind::precondition, "recolor editor: expected 'recolor:#rrggbb'");
  const double target = rgb_to_hsv((*p.color)[0], (*p.color)[1], (*p.color)[2]).h;
  double hue = target;
  double jitter = jitter_;
  if (call.reference) {
    std::optional<double> h;
    if (call.reference_mask) h = masked_mean_hue(*call.reference, *call.reference_mask);
    if (!h) h = nearest_reference_hue(*call.reference, target);
    if (h) hue = *h;
    jitter /= 10.0;
  }
  if (jitter > 0.0) {
    Rng rng = Rng(seed_).fork(Stage::editor, static_cast<std::uint64_t>(call.index));
    hue += jitter * rng.normal();
  }
  hue = std::fmod(std::fmod(hue, 360.0) + 360.0, 360.0);

  Image out = call.frame;
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      const double m = mask_at(call, y, x);
      if (m <= 0.0) continue;
      Hsv hsv = rgb_to_hsv(out.at(y, x, 0), out.at(y, x, 1), out.at(y, x, 2));
      hsv.h = hue;
      const auto rgb = hsv_to_rgb(hsv);
      for (int c = 0; c < 3; ++c) {
        const double v = m * rgb[static_cast<std::size_t>(c)] + (1.0 - m) * out.at(y, x, c);
        out.at(y, x, c) = static_cast<float>(v);
      }
    }
  out.clamp01();
  return out;
}

Image PasteSpriteEditor::edit(const EditCall& call) const {
  check_call(call);
  const Prompt p = parse_prompt(call.prompt);
  Image fill;
  if (p.verb == "add") {
    if (!p.color) fail(ErrorKind::precondition, "paste editor: expected 'add:#rrggbb'");
    Image solid(call.frame.height(), call.frame.width(), 3);
    for (int y = 0; y < solid.height(); ++y)
      for (int x = 0; x < solid.width(); ++x)
        for (int c = 0; c < 3; ++c) solid.at(y, x, c) = (*p.color)[static_cast<std::size_t>(c)];
    fill = convert_channels(solid, call.frame.channels());
  } else if (p.verb == "remove") {
    if (!truth_) fail(ErrorKind::precondition, "paste editor: 'remove' needs a clean reference video");
    require(call.index >= 0 && call.index < truth_->length(), "paste editor: frame index outside the clean video");
    fill = truth_->frame(call.index);
    require(fill.same_shape(call.frame), "paste editor: clean video does not match the frame");
  } else {
    fail(ErrorKind::precondition, "paste editor: unknown prompt '" + call.prompt + "'");
  }
  if (!call.mask) return fill;
  Image out = call.frame;
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      const float m = call.mask->at(y, x);
      if (m <= 0.0f) continue;
      for (int c = 0; c < out.channels(); ++c) out.at(y, x, c) = m * fill.at(y, x, c) + (1.0f - m) * out.at(y, x, c);
    }
  return out;
}

std::unique_ptr<KeyframeEditor> make_editor(const std::string& id, std::uint64_t seed, std::optional<Video> truth) {
  const auto colon = id.find(':');
  const std::string name = id.substr(0, colon);
  if (name == "identity") return std::make_unique<IdentityEditor>();
  if (name == "recolor") {
    double jitter = 0.0;
    if (colon != std::string::npos) {
      try {
        jitter = std::stod(id.substr(colon + 1));
      } catch (const std::exception&) {
        fail(ErrorKind::config, "editor '" + id + "': jitter must be a number");
      }
      if (!(jitter >= 0.0)) fail(ErrorKind::config, "editor '" + id + "': jitter must be non-negative");
    }
    return std::make_unique<RecolorEditor>(jitter, seed);
  }
  if (name == "paste") return std::make_unique<PasteSpriteEditor>(std::move(truth));
  fail(ErrorKind::config, "unknown editor '" + id + "' (expected identity|recolor[:jitter]|paste)");
}

}  // namespace nova::inference
