#pragma once

// Subcommand implementations behind the `nova` executable. Every command
// writes into a run directory holding the outputs, a manifest (command,
// arguments, resolved config, output digests), a config snapshot and a log.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nova/denoiser/params.hpp"
#include "nova/inference.hpp"
#include "nova/moving_shapes.hpp"
#include "nova/run_config.hpp"

namespace nova::app {

struct Invocation {
  std::string command;
  std::map<std::string, std::string> args;  // flag name -> value
  RunConfig config;
};

/// Config file, then --set overrides. The seed falls back to NOVA_SEED when
/// neither sets it.
RunConfig resolve_config(const std::optional<std::string>& config_path, const Overrides& sets,
                         const std::optional<std::uint64_t>& seed_flag);

/// Runs one subcommand to completion.
void execute(const Invocation& inv, bool quiet = false);

struct ReplayReport {
  std::vector<std::string> identical;
  std::vector<std::string> differing;
  std::vector<std::string> missing;
  bool ok() const noexcept { return differing.empty() && missing.empty(); }
};

/// Re-executes the run recorded in `manifest` into `out` and compares output digests.
ReplayReport replay(const std::filesystem::path& manifest, const std::filesystem::path& out, bool quiet = false);

/// CLI entry point; returns the process exit code.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

/// 64-bit FNV-1a digest of a file, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

/// Every video in `dir` (.nvt files and frame subdirectories), sorted by name.
std::vector<Video> load_collection(const std::filesystem::path& dir);

// Ablation experiments, shared with the acceptance suite.

struct DenseAblationRow {
  int case_index = 0;
  std::string kind;
  double psnr_full = 0.0;
  double psnr_no_dense = 0.0;
};

/// Add/remove cases at `frames` frames with ground truth known by construction.
std::vector<shapes::EditCase> ablation_cases(const RunConfig& cfg, int count, int frames, std::uint64_t seed);

/// Background PSNR (outside the edit mask, vs. truth) of the edited output.
double edit_background_psnr(const shapes::EditCase& ec, const denoiser::DenoiserParams<float>& params,
                            const RunConfig& cfg, int interval, std::uint64_t seed);

struct ConsistencyRow {
  int case_index = 0;
  double anchored = 0.0;
  double independent = 0.0;
};

/// Inter-keyframe hue variance of the jittered recolor editor, anchored vs.
/// independent, on recolor cases.
std::vector<ConsistencyRow> consistency_ablation(const RunConfig& cfg, int count, int frames, int interval,
                                                 double jitter, std::uint64_t seed);

struct IntervalRow {
  int interval = 0;
  double bg_ssim = 0.0;
  double psnr = 0.0;
};

/// Mean BG-SSIM (output vs. source) of recolor edits at each interval.
std::vector<IntervalRow> interval_sweep(const std::vector<shapes::EditCase>& cases,
                                        const denoiser::DenoiserParams<float>& params, const RunConfig& cfg,
                                        const std::vector<int>& intervals, std::uint64_t seed);

}  // namespace nova::app
