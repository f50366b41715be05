#pragma once

#include <filesystem>

#include "nova/denoiser/params.hpp"

namespace nova::denoiser {

/// Writes every tensor as a record of `path` (.nvt) and the model config,
/// parameter names, shapes, groups and freeze mask to `<path>.manifest`.
void save_checkpoint(const std::filesystem::path& path, const DenoiserParams<float>& params);

/// Throws ErrorKind::data when the bundle and manifest disagree.
DenoiserParams<float> load_checkpoint(const std::filesystem::path& path);

std::filesystem::path checkpoint_manifest_path(const std::filesystem::path& path);

}  // namespace nova::denoiser
