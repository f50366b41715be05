#pragma once

#include <filesystem>

#include "nova/video.hpp"

namespace nova {

enum class VideoFormat { frames, container };

/// Loads either a directory of PNG frames (sorted by file name) or an .nvt
/// container. PNG samples are scaled from 8-bit to [0, 1].
Video load_video(const std::filesystem::path& path);

/// frames: writes 00000.png, 00001.png, ... into the directory `path`
/// (8-bit quantized). container: writes a single .nvt record to `path`.
void save_video(const Video& v, const std::filesystem::path& path, VideoFormat format);

MaskSequence load_masks(const std::filesystem::path& path);
void save_masks(const MaskSequence& m, const std::filesystem::path& path, VideoFormat format);

Image load_png(const std::filesystem::path& path);
void save_png(const Image& img, const std::filesystem::path& path);

}  // namespace nova
