#include "nova/video_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "nova/error.hpp"
#include "nova/nvt.hpp"

namespace nova {
namespace fs = std::filesystem;
namespace {

bool is_container(const fs::path& path) { return path.extension() == ".nvt"; }

std::vector<fs::path> list_pngs(const fs::path& dir) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
  }
  if (ec) fail(ErrorKind::data, "cannot list directory: " + dir.string());
  std::sort(files.begin(), files.end());
  return files;
}

std::string frame_name(int t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05d.png", t);
  return buf;
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) fail(ErrorKind::data, "cannot create directory: " + dir.string());
}

}  // namespace

Image load_png(const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str()))
    fail(ErrorKind::data, "cannot read png " + path.string() + ": " + image.message);
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    fail(ErrorKind::data, "cannot decode png " + path.string() + ": " + msg);
  }
  std::vector<float> data(buffer.size());
  std::transform(buffer.begin(), buffer.end(), data.begin(),
                 [](png_byte b) { return static_cast<float>(b) / 255.0f; });
  return Image(static_cast<int>(image.height), static_cast<int>(image.width), channels, std::move(data));
}

void save_png(const Image& img, const fs::path& path) {
  require(!img.empty(), "save_png: empty image");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(img.size());
  std::transform(img.data().begin(), img.data().end(), buffer.begin(), [](float v) {
    const float c = std::isnan(v) ? 0.0f : std::clamp(v, 0.0f, 1.0f);
    return static_cast<png_byte>(std::lround(c * 255.0f));
  });
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, buffer.data(), 0, nullptr))
    fail(ErrorKind::data, "cannot write png " + path.string() + ": " + image.message);
}

Video load_video(const fs::path& path) {
  if (is_container(path)) {
    const auto blobs = read_nvt(path);
    return video_from_blob(blobs.front());
  }
  if (!fs::is_directory(path)) fail(ErrorKind::data, "not a frame directory or .nvt file: " + path.string());
  const auto files = list_pngs(path);
  if (files.size() < 2) fail(ErrorKind::data, "video needs at least two frames: " + path.string());
  std::vector<Image> frames;
  frames.reserve(files.size());
  for (const auto& f : files) frames.push_back(load_png(f));
  return Video(std::move(frames));
}

void save_video(const Video& v, const fs::path& path, VideoFormat format) {
  require(!v.empty(), "save_video: empty video");
  if (format == VideoFormat::container) {
    if (path.has_parent_path()) ensure_directory(path.parent_path());
    write_nvt(path, {to_blob(v)});
    return;
  }
  ensure_directory(path);
  for (int t = 0; t < v.length(); ++t) save_png(v[t], path / frame_name(t));
}

MaskSequence load_masks(const fs::path& path) {
  if (is_container(path)) return masks_from_blob(read_nvt(path).front());
  if (!fs::is_directory(path)) fail(ErrorKind::data, "not a mask directory or .nvt file: " + path.string());
  std::vector<Image> masks;
  for (const auto& f : list_pngs(path)) {
    Image img = load_png(f);
    if (img.channels() != 1) {
      Image gray(img.height(), img.width(), 1);
      for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) gray.at(y, x) = img.at(y, x, 0);
      img = std::move(gray);
    }
    masks.push_back(std::move(img));
  }
  return MaskSequence(std::move(masks));
}

void save_masks(const MaskSequence& m, const fs::path& path, VideoFormat format) {
  require(!m.empty(), "save_masks: empty mask sequence");
  if (format == VideoFormat::container) {
    if (path.has_parent_path()) ensure_directory(path.parent_path());
    write_nvt(path, {to_blob(m)});
    return;
  }
  ensure_directory(path);
  for (int t = 0; t < m.length(); ++t) save_png(m[t], path / frame_name(t));
}

}  // namespace nova
