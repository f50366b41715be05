#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nova/rng.hpp"
#include "nova/video.hpp"

namespace nova::test {

inline Image random_image(Rng& rng, int h, int w, int c) {
  Image img(h, w, c);
  for (auto& v : img.data()) v = static_cast<float>(rng.uniform());
  return img;
}

inline Video random_video(Rng& rng, int frames, int h, int w, int c) {
  std::vector<Image> out;
  for (int t = 0; t < frames; ++t) out.push_back(random_image(rng, h, w, c));
  return Video(std::move(out));
}

inline Image random_binary(Rng& rng, int h, int w, double p = 0.5) {
  Image m(h, w, 1);
  for (auto& v : m.data()) v = rng.bernoulli(p) ? 1.0f : 0.0f;
  return m;
}

inline double max_abs_diff(const Image& a, const Image& b) {
  double out = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    out = std::max(out, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
  return out;
}

inline double max_abs_diff(const Video& a, const Video& b) {
  double out = 0.0;
  for (int t = 0; t < a.length(); ++t) out = std::max(out, max_abs_diff(a[t], b[t]));
  return out;
}

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("nova_test_" + tag + "_" + std::to_string(Rng(reinterpret_cast<std::uintptr_t>(this)).next_u64() % 1000000));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

}  // namespace nova::test
