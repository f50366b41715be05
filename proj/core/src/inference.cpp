#include "nova/inference.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "nova/anchor.hpp"
#include "nova/error.hpp"
#include "nova/image_ops.hpp"

namespace nova::inference {
namespace {

std::string join(const std::vector<int>& v) {
  std::ostringstream out;
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
  return out.str();
}

std::optional<double> mean_hue(const Image& frame, const Image& mask) {
  double sx = 0.0, sy = 0.0;
  for (int y = 0; y < frame.height(); ++y)
    for (int x = 0; x < frame.width(); ++x) {
      if (mask.at(y, x) < 0.5f) continue;
      const Hsv hsv = rgb_to_hsv(frame.at(y, x, 0), frame.at(y, x, 1), frame.at(y, x, 2));
      if (hsv.s < 0.2 || hsv.v < 0.1) continue;
      const double a = hsv.h * std::numbers::pi / 180.0;
      sx += std::cos(a);
      sy += std::sin(a);
    }
  if (sx == 0.0 && sy == 0.0) return std::nullopt;
  return std::atan2(sy, sx) * 180.0 / std::numbers::pi;
}

std::vector<double> keyframe_hues(const std::map<int, Image>& edited, const MaskSequence& masks) {
  std::vector<double> hues;
  for (const auto& [k, frame] : edited) {
    require(k >= 0 && k < masks.length(), "hue variance: keyframe outside the mask sequence");
    require(frame.channels() == 3, "hue variance: RGB frames required");
    if (const auto h = mean_hue(frame, masks[k])) hues.push_back(*h);
  }
  return hues;
}

}  // namespace

void EditRequest::validate() const {
  require(keyframes.last_index() == source.last_index(), "edit request: keyframes do not span the source video");
  if (masks) require(masks->matches(source), "edit request: masks do not match the source video");
  require(!editor_id.empty(), "edit request: editor id is empty");
}

const char* to_string(EditingMode m) noexcept { return m == EditingMode::anchored ? "anchored" : "independent"; }

EditingMode parse_editing_mode(const std::string& s) {
  if (s == "anchored") return EditingMode::anchored;
  if (s == "independent") return EditingMode::independent;
  fail(ErrorKind::config, "unknown editing mode '" + s + "' (expected anchored|independent)");
}

std::map<int, Image> edit_keyframes(const EditRequest& req, const KeyframeEditor& editor, EditingMode mode) {
  req.validate();
  std::map<int, Image> edited;
  const Image* first = nullptr;
  const Image* first_mask = nullptr;
  for (const int k : req.keyframes.indices()) {
    const Image* mask = req.masks ? &(*req.masks)[k] : nullptr;
    EditCall call{req.source[k], nullptr, mask, nullptr, req.prompt, k};
    if (mode == EditingMode::anchored && first) {
      call.reference = first;
      call.reference_mask = first_mask;
    }
    Image out;
    try {
      out = editor.edit(call);
    } catch (const Error& e) {
      throw Error(e.kind(), "editor '" + editor.id() + "' failed on keyframe " + std::to_string(k) + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorKind::data, "editor '" + editor.id() + "' failed on keyframe " + std::to_string(k) + ": " +
                                       e.what());
    }
    if (!out.same_shape(req.source[k]) || !out.all_finite() || !out.within_unit())
      fail(ErrorKind::data, "editor '" + editor.id() + "' returned an invalid frame for keyframe " + std::to_string(k));
    auto [it, inserted] = edited.emplace(k, std::move(out));
    if (k == 0) {
      first = &it->second;
      first_mask = mask;
    }
  }
  return edited;
}

Video build_reference(const std::map<int, Image>& edited, int last_index, int workers) {
  return anchor::interpolate_reference(edited, last_index, workers);
}

EditResult run_edit(const EditRequest& req, const KeyframeEditor& editor, const denoiser::DenoiserParams<float>& params,
                    const denoiser::NoiseSchedule& schedule, const RunOptions& options) {
  EditResult r;
  r.keyframes = edit_keyframes(req, editor, options.mode);
  r.reference = build_reference(r.keyframes, req.source.last_index(), options.workers);
  r.video = denoiser::sample(r.reference, req.source, params, schedule, options.sampling);
  Manifest& m = r.manifest;
  m.set("keyframes", join(req.keyframes.indices()));
  m.set("editor", req.editor_id);
  m.set("prompt", req.prompt);
  m.set("mode", to_string(options.mode));
  m.set("masks", req.masks.has_value());
  m.set("sampling.steps", options.sampling.steps);
  m.set("sampling.seed", options.sampling.seed);
  m.set("sampling.sparse", options.sampling.options.sparse);
  m.set("sampling.dense", options.sampling.options.dense);
  m.set("sampling.clip_x0", options.sampling.clip_x0);
  return r;
}

double keyframe_hue_variance(const std::map<int, Image>& edited, const MaskSequence& masks) {
  const std::vector<double> hues = keyframe_hues(edited, masks);
  require(!hues.empty(), "hue variance: no saturated pixels inside any keyframe mask");
  double sx = 0.0, sy = 0.0;
  for (double h : hues) {
    sx += std::cos(h * std::numbers::pi / 180.0);
    sy += std::sin(h * std::numbers::pi / 180.0);
  }
  const double n = static_cast<double>(hues.size());
  return std::max(0.0, 1.0 - std::sqrt(sx * sx + sy * sy) / n);
}

double keyframe_hue_spread(const std::map<int, Image>& edited, const MaskSequence& masks) {
  const std::vector<double> hues = keyframe_hues(edited, masks);
  double spread = 0.0;
  for (std::size_t i = 0; i < hues.size(); ++i)
    for (std::size_t j = i + 1; j < hues.size(); ++j) spread = std::max(spread, std::abs(hue_difference(hues[i], hues[j])));
  return spread;
}

}  // namespace nova::inference
