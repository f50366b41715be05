#pragma once

#include <array>
#include <vector>

#include "nova/video.hpp"

namespace nova {

/// Maps output pixel coordinates to source coordinates:
///   src = [[a, b], [c, d]] * dst + [tx, ty]
/// Coordinates are continuous with pixel centers at integer + 0.5.
struct Affine2 {
  double a = 1, b = 0, c = 0, d = 1, tx = 0, ty = 0;

  static Affine2 identity() { return {}; }
  std::array<double, 2> apply(double x, double y) const { return {a * x + b * y + tx, c * x + d * y + ty}; }
};

/// Bilinear sample at continuous (x, y) with edge-replicate padding.
float sample_bilinear(const Image& img, double x, double y, int channel);

/// Resamples `img` through `inverse_map` (dst -> src), bilinear, edge-replicate.
Image warp_affine(const Image& img, const Affine2& inverse_map);

/// Normalized 1-D Gaussian taps with radius ceil(3 sigma), at least 1.
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian blur with edge-replicate borders.
Image gaussian_blur(const Image& img, double sigma);

/// out = (1 - w) * a + w * b per pixel, w single-channel broadcast over channels.
Image blend(const Image& a, const Image& b, const Image& weight);

Image resize_bilinear(const Image& img, int height, int width);

/// Rec. 601 luma for RGB, identity for grayscale.
Image to_gray(const Image& img);

/// Converts between 1 and 3 channels (replicate or luma).
Image convert_channels(const Image& img, int channels);

struct Hsv {
  double h;  // degrees in [0, 360)
  double s;
  double v;
};
Hsv rgb_to_hsv(double r, double g, double b);
std::array<double, 3> hsv_to_rgb(const Hsv& hsv);

/// Smallest signed difference a - b between two angles in degrees, in (-180, 180].
double hue_difference(double a, double b);

}  // namespace nova
