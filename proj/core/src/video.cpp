#include "nova/video.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nova/error.hpp"

namespace nova {

Image::Image(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  require(height > 0 && width > 0, "image: dimensions must be positive");
  require(channels == 1 || channels == 3, "image: channels must be 1 or 3");
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image::Image(int height, int width, int channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  require(height > 0 && width > 0, "image: dimensions must be positive");
  require(channels == 1 || channels == 3, "image: channels must be 1 or 3");
  require(data_.size() == static_cast<std::size_t>(height) * width * channels,
          "image: data size does not match shape");
}

void Image::clamp01() noexcept {
  for (float& v : data_) v = std::isnan(v) ? 0.0f : std::clamp(v, 0.0f, 1.0f);
}

bool Image::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

bool Image::within_unit() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return v >= 0.0f && v <= 1.0f; });
}

Video::Video(std::vector<Image> frames) : frames_(std::move(frames)) {
  if (frames_.size() < 2) fail(ErrorKind::data, "video: needs at least two frames");
  const Image& first = frames_.front();
  for (std::size_t t = 0; t < frames_.size(); ++t) {
    const Image& f = frames_[t];
    if (f.empty() || !f.same_shape(first))
      fail(ErrorKind::data, "video: frame " + std::to_string(t) + " shape mismatch");
    if (!f.within_unit())
      fail(ErrorKind::data, "video: frame " + std::to_string(t) + " has samples outside [0,1]");
  }
}

MaskSequence::MaskSequence(std::vector<Image> masks) : masks_(std::move(masks)) {
  if (masks_.empty()) fail(ErrorKind::data, "mask sequence: empty");
  binary_ = true;
  const Image& first = masks_.front();
  for (std::size_t t = 0; t < masks_.size(); ++t) {
    const Image& m = masks_[t];
    if (m.channels() != 1 || !m.same_raster(first))
      fail(ErrorKind::data, "mask sequence: mask " + std::to_string(t) + " shape mismatch");
    if (!m.within_unit())
      fail(ErrorKind::data, "mask sequence: mask " + std::to_string(t) + " outside [0,1]");
    for (float v : m.data())
      if (v != 0.0f && v != 1.0f) binary_ = false;
  }
}

KeyframeSet::KeyframeSet(std::vector<int> indices, int last_index)
    : indices_(std::move(indices)), last_index_(last_index) {
  require(last_index >= 1, "keyframes: video needs at least two frames");
  require(indices_.size() >= 2, "keyframes: need at least the two endpoints");
  require(indices_.front() == 0, "keyframes: first keyframe must be 0");
  require(indices_.back() == last_index, "keyframes: last keyframe must be T");
  for (std::size_t i = 1; i < indices_.size(); ++i)
    require(indices_[i - 1] < indices_[i], "keyframes: indices must be strictly increasing");
}

KeyframeSet KeyframeSet::fixed_interval(int last_index, int interval) {
  require(interval >= 1, "keyframes: interval must be positive");
  require(last_index >= 1, "keyframes: video needs at least two frames");
  std::vector<int> idx;
  for (int k = 0; k < last_index; k += interval) idx.push_back(k);
  idx.push_back(last_index);
  return KeyframeSet(std::move(idx), last_index);
}

bool KeyframeSet::contains(int t) const noexcept {
  return std::binary_search(indices_.begin(), indices_.end(), t);
}

}  // namespace nova
