#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nova {

/// A single raster, row-major H x W x C with interleaved channels.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, float fill = 0.0f);
  Image(int height, int width, int channels, std::vector<float> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t pixels() const noexcept { return static_cast<std::size_t>(height_) * width_; }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t index(int y, int x, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  float& at(int y, int x, int c = 0) noexcept { return data_[index(y, x, c)]; }
  float at(int y, int x, int c = 0) const noexcept { return data_[index(y, x, c)]; }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool same_shape(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }
  bool same_raster(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  /// Clamps every sample to [0, 1]; NaN becomes 0.
  void clamp01() noexcept;
  bool all_finite() const noexcept;
  bool within_unit() const noexcept;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Ordered frame sequence x_0..x_T. At least two frames, one shared shape,
/// C in {1, 3}, every sample finite and inside [0, 1].
class Video {
 public:
  Video() = default;
  explicit Video(std::vector<Image> frames);

  int length() const noexcept { return static_cast<int>(frames_.size()); }
  int last_index() const noexcept { return length() - 1; }
  int height() const noexcept { return frames_.empty() ? 0 : frames_.front().height(); }
  int width() const noexcept { return frames_.empty() ? 0 : frames_.front().width(); }
  int channels() const noexcept { return frames_.empty() ? 0 : frames_.front().channels(); }
  bool empty() const noexcept { return frames_.empty(); }

  const Image& frame(int t) const { return frames_.at(static_cast<std::size_t>(t)); }
  const Image& operator[](int t) const { return frame(t); }
  const std::vector<Image>& frames() const noexcept { return frames_; }

  bool same_shape(const Video& other) const noexcept {
    return length() == other.length() && height() == other.height() && width() == other.width() &&
           channels() == other.channels();
  }

  friend bool operator==(const Video&, const Video&) = default;

 private:
  std::vector<Image> frames_;
};

/// Per-frame single-channel masks with values in [0, 1]. When binary() is
/// true every value is exactly 0 or 1.
class MaskSequence {
 public:
  MaskSequence() = default;
  explicit MaskSequence(std::vector<Image> masks);

  int length() const noexcept { return static_cast<int>(masks_.size()); }
  int height() const noexcept { return masks_.empty() ? 0 : masks_.front().height(); }
  int width() const noexcept { return masks_.empty() ? 0 : masks_.front().width(); }
  bool binary() const noexcept { return binary_; }
  bool empty() const noexcept { return masks_.empty(); }

  const Image& mask(int t) const { return masks_.at(static_cast<std::size_t>(t)); }
  const Image& operator[](int t) const { return mask(t); }
  const std::vector<Image>& masks() const noexcept { return masks_; }

  bool matches(const Video& v) const noexcept {
    return length() == v.length() && height() == v.height() && width() == v.width();
  }

  friend bool operator==(const MaskSequence&, const MaskSequence&) = default;

 private:
  std::vector<Image> masks_;
  bool binary_ = false;
};

/// Sorted anchor indices k_0 = 0 < ... < k_N = T with N >= 1.
class KeyframeSet {
 public:
  KeyframeSet(std::vector<int> indices, int last_index);

  /// {0, interval, 2*interval, ...} plus T when interval does not divide T.
  static KeyframeSet fixed_interval(int last_index, int interval);

  const std::vector<int>& indices() const noexcept { return indices_; }
  int last_index() const noexcept { return last_index_; }
  int size() const noexcept { return static_cast<int>(indices_.size()); }
  int segments() const noexcept { return size() - 1; }
  bool contains(int t) const noexcept;

  friend bool operator==(const KeyframeSet&, const KeyframeSet&) = default;

 private:
  std::vector<int> indices_;
  int last_index_;
};

}  // namespace nova
