#include "nova/image_ops.hpp"

#include <algorithm>
#include <cmath>

#include "nova/error.hpp"

namespace nova {

float sample_bilinear(const Image& img, double x, double y, int channel) {
  // Continuous coordinates have pixel centers at +0.5.
  const double fx = std::clamp(x - 0.5, 0.0, static_cast<double>(img.width() - 1));
  const double fy = std::clamp(y - 0.5, 0.0, static_cast<double>(img.height() - 1));
  const int x0 = static_cast<int>(std::floor(fx));
  const int y0 = static_cast<int>(std::floor(fy));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double wx = fx - x0;
  const double wy = fy - y0;
  const double top = (1.0 - wx) * img.at(y0, x0, channel) + wx * img.at(y0, x1, channel);
  const double bottom = (1.0 - wx) * img.at(y1, x0, channel) + wx * img.at(y1, x1, channel);
  return static_cast<float>((1.0 - wy) * top + wy * bottom);
}

Image warp_affine(const Image& img, const Affine2& m) {
  Image out(img.height(), img.width(), img.channels());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const auto [sx, sy] = m.apply(x + 0.5, y + 0.5);
      for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = sample_bilinear(img, sx, sy, c);
    }
  }
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  require(sigma > 0.0, "gaussian kernel: sigma must be positive");
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (double& w : k) w /= sum;
  return k;
}

Image gaussian_blur(const Image& img, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int h = img.height(), w = img.width(), ch = img.channels();
  std::vector<double> tmp(img.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * img.at(y, std::clamp(x + i, 0, w - 1), c);
        tmp[img.index(y, x, c)] = acc;
      }
  Image out(h, w, ch);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i)
          acc += k[static_cast<std::size_t>(i + r)] * tmp[img.index(std::clamp(y + i, 0, h - 1), x, c)];
        out.at(y, x, c) = static_cast<float>(acc);
      }
  return out;
}

Image blend(const Image& a, const Image& b, const Image& weight) {
  require(a.same_shape(b), "blend: shape mismatch");
  require(weight.channels() == 1 && weight.same_raster(a), "blend: weight must be a matching single-channel raster");
  Image out(a.height(), a.width(), a.channels());
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      const float m = weight.at(y, x);
      for (int c = 0; c < a.channels(); ++c) out.at(y, x, c) = (1.0f - m) * a.at(y, x, c) + m * b.at(y, x, c);
    }
  return out;
}

Image resize_bilinear(const Image& img, int height, int width) {
  if (img.height() == height && img.width() == width) return img;
  Image out(height, width, img.channels());
  const double sy = static_cast<double>(img.height()) / height;
  const double sx = static_cast<double>(img.width()) / width;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < img.channels(); ++c)
        out.at(y, x, c) = sample_bilinear(img, (x + 0.5) * sx, (y + 0.5) * sy, c);
  return out;
}

Image to_gray(const Image& img) {
  if (img.channels() == 1) return img;
  Image out(img.height(), img.width(), 1);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      out.at(y, x) = 0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) + 0.114f * img.at(y, x, 2);
  return out;
}

Image convert_channels(const Image& img, int channels) {
  if (img.channels() == channels) return img;
  if (channels == 1) return to_gray(img);
  Image out(img.height(), img.width(), 3);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, x, 0);
  return out;
}

Hsv rgb_to_hsv(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  double h = 0.0;
  if (delta > 0.0) {
    if (mx == r)
      h = 60.0 * std::fmod((g - b) / delta, 6.0);
    else if (mx == g)
      h = 60.0 * ((b - r) / delta + 2.0);
    else
      h = 60.0 * ((r - g) / delta + 4.0);
  }
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  return {h, mx > 0.0 ? delta / mx : 0.0, mx};
}

std::array<double, 3> hsv_to_rgb(const Hsv& hsv) {
  const double c = hsv.v * hsv.s;
  double hp = std::fmod(hsv.h, 360.0);
  if (hp < 0.0) hp += 360.0;
  hp /= 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp)) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  const double m = hsv.v - c;
  return {r + m, g + m, b + m};
}

double hue_difference(double a, double b) {
  double d = std::fmod(a - b, 360.0);
  if (d <= -180.0) d += 360.0;
  if (d > 180.0) d -= 360.0;
  return d;
}

}  // namespace nova
