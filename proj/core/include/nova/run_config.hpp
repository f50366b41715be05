#pragma once

// Plain key=value run configuration with dotted section names. Every key
// has a documented default; unknown keys are rejected.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nova/anchor.hpp"
#include "nova/denoiser/params.hpp"
#include "nova/denoiser/train.hpp"
#include "nova/fidelity.hpp"
#include "nova/inference.hpp"
#include "nova/moving_shapes.hpp"

namespace nova {

struct RunConfig {
  std::uint64_t seed = 0;
  int workers = 1;

  shapes::ClipSpec data{};
  int clips = 64;

  /// 0 selects random interior keyframes; otherwise a fixed interval that
  /// must divide data.frames - 1.
  int keyframe_interval = 0;
  int keyframe_n_interior = 2;

  anchor::DegradationConfig degrade{};
  fidelity::FidelityConfig fidelity{};
  denoiser::ModelConfig model{};
  denoiser::TrainConfig train{};
  int log_every = 50;

  int infer_interval = 10;
  int infer_steps = 50;
  inference::EditingMode infer_mode = inference::EditingMode::anchored;
  bool infer_clip_x0 = true;

  std::string eval_tc_reference = "edited_first";

  int ablate_cases = 10;
  int ablate_frames = 81;
  std::vector<int> ablate_intervals = {8, 10, 16, 20};
  /// Allowed absolute BG-SSIM deviation from the interval-10 run.
  double ablate_band = 0.05;
  /// Per-call hue jitter (degrees) of the recolor editor in the consistency ablation.
  double ablate_jitter = 10.0;

  /// Training keyframe mode derived from the keyframe.* keys.
  anchor::KeyframeMode keyframe_mode() const;
  /// Copies shared values (seed, dims, workers) into the nested configs.
  void resolve();
  void validate() const;
};

struct ConfigKey {
  std::string key;
  std::string doc;
};

/// Every accepted key with a one-line description, in snapshot order.
const std::vector<ConfigKey>& config_keys();

using Overrides = std::vector<std::pair<std::string, std::string>>;

/// Parses `text` over the defaults, then applies `overrides` in order.
/// Errors name the offending line or override.
RunConfig parse_config(const std::string& text, const Overrides& overrides = {});
RunConfig load_config(const std::string& path, const Overrides& overrides = {});

/// Applies one key=value override; `origin` labels error messages.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value, const std::string& origin);

/// Fully resolved key=value text; parse_config(snapshot(c)) reproduces c.
std::string snapshot(const RunConfig& cfg);

std::string get_setting(const RunConfig& cfg, const std::string& key);

/// Intervals dividing last_index into 4 to 10 segments (all divisors when none do).
std::vector<int> suggest_intervals(int last_index);
/// Throws ErrorKind::config when `interval` does not divide `last_index`.
void check_interval(int last_index, int interval, const std::string& where);

}  // namespace nova
