#pragma once

#include <map>
#include <optional>
#include <string>

#include "nova/denoiser/sample.hpp"
#include "nova/editors.hpp"
#include "nova/manifest.hpp"
#include "nova/video.hpp"

namespace nova::inference {

struct EditRequest {
  Video source;
  KeyframeSet keyframes;
  std::string prompt;
  std::optional<MaskSequence> masks;  // per-frame user masks, 1 = editable
  std::string editor_id;

  void validate() const;
};

/// anchored: keyframe k_0 is edited alone, every later keyframe is edited
/// with the edited k_0 as reference. independent: every keyframe alone.
enum class EditingMode { anchored, independent };

const char* to_string(EditingMode m) noexcept;
EditingMode parse_editing_mode(const std::string& s);

/// Edits keyframes in ascending order. Editor failures are rethrown with the
/// failing frame index.
std::map<int, Image> edit_keyframes(const EditRequest& req, const KeyframeEditor& editor,
                                    EditingMode mode = EditingMode::anchored);

/// Piecewise-linear reference through the edited keyframes.
Video build_reference(const std::map<int, Image>& edited, int last_index, int workers = 1);

struct EditResult {
  Video video;
  Video reference;
  std::map<int, Image> keyframes;
  Manifest manifest;
};

struct RunOptions {
  EditingMode mode = EditingMode::anchored;
  denoiser::SampleConfig sampling{};
  int workers = 1;
};

EditResult run_edit(const EditRequest& req, const KeyframeEditor& editor, const denoiser::DenoiserParams<float>& params,
                    const denoiser::NoiseSchedule& schedule, const RunOptions& options = {});

/// Circular variance (1 - resultant length, in [0, 1]) of the per-keyframe
/// mean hue inside each keyframe's mask. Pixels with low saturation are
/// ignored; keyframes without saturated masked pixels are skipped.
double keyframe_hue_variance(const std::map<int, Image>& edited, const MaskSequence& masks);

/// Largest pairwise difference in degrees between per-keyframe mean hues.
double keyframe_hue_spread(const std::map<int, Image>& edited, const MaskSequence& masks);

}  // namespace nova::inference
