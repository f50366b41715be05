#pragma once

// Keyframe editors. Prompts use a micro-grammar understood by the oracle
// editors: "recolor:#rrggbb", "add:#rrggbb", "remove".

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "nova/video.hpp"

namespace nova::inference {

struct EditCall {
  const Image& frame;
  const Image* reference = nullptr;  // edited first keyframe, when anchoring
  const Image* mask = nullptr;       // 1 marks the editable region
  const Image* reference_mask = nullptr;
  const std::string& prompt;
  int index = 0;                     // frame index within the video
};

/// Output has the input's shape; where the mask is 0 the input is kept.
class KeyframeEditor {
 public:
  virtual ~KeyframeEditor() = default;
  virtual std::string id() const = 0;
  virtual Image edit(const EditCall& call) const = 0;
};

class IdentityEditor final : public KeyframeEditor {
 public:
  std::string id() const override { return "identity"; }
  Image edit(const EditCall& call) const override { return call.frame; }
};

/// Sets the hue inside the mask to the prompt color's hue, keeping saturation
/// and value. `jitter_deg` adds a per-call Gaussian hue perturbation (seeded
/// by frame index). With a reference, the hue is read back from the
/// reference (mean hue inside the reference mask, or else the saturated pixel
/// closest to the prompt hue) and the jitter shrinks tenfold.
class RecolorEditor final : public KeyframeEditor {
 public:
  explicit RecolorEditor(double jitter_deg = 0.0, std::uint64_t seed = 0) : jitter_(jitter_deg), seed_(seed) {}
  std::string id() const override { return "recolor"; }
  Image edit(const EditCall& call) const override;

 private:
  double jitter_;
  std::uint64_t seed_;
};

/// "add:#rrggbb" paints the mask with a flat color; "remove" copies the
/// masked pixels from a known clean video.
class PasteSpriteEditor final : public KeyframeEditor {
 public:
  explicit PasteSpriteEditor(std::optional<Video> truth = std::nullopt) : truth_(std::move(truth)) {}
  std::string id() const override { return "paste"; }
  Image edit(const EditCall& call) const override;

 private:
  std::optional<Video> truth_;
};

/// "identity", "recolor[:jitter]", "paste". `truth` backs paste removal.
std::unique_ptr<KeyframeEditor> make_editor(const std::string& id, std::uint64_t seed = 0,
                                            std::optional<Video> truth = std::nullopt);

std::array<float, 3> parse_hex_color(const std::string& hex);

struct Prompt {
  std::string verb;  // recolor | add | remove
  std::optional<std::array<float, 3>> color;
};
Prompt parse_prompt(const std::string& prompt);

}  // namespace nova::inference
