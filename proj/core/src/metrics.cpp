#include "nova/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "nova/error.hpp"
#include "nova/image_ops.hpp"

namespace nova::metrics {
namespace {

struct Plane {
  int h = 0, w = 0;
  std::vector<double> v;
  double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

Plane luma(const Image& img) {
  const Image g = to_gray(img);
  Plane p{g.height(), g.width(), {}};
  p.v.assign(g.data().begin(), g.data().end());
  return p;
}

const std::vector<double>& window_weights() {
  static const std::vector<double> w = [] {
    const int r = kSsimWindow / 2;
    std::vector<double> k(kSsimWindow);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) sum += k[static_cast<std::size_t>(i + r)] = std::exp(-(i * i) / (2.0 * kSsimSigma * kSsimSigma));
    for (double& x : k) x /= sum;
    std::vector<double> w2(static_cast<std::size_t>(kSsimWindow * kSsimWindow));
    for (int y = 0; y < kSsimWindow; ++y)
      for (int x = 0; x < kSsimWindow; ++x)
        w2[static_cast<std::size_t>(y * kSsimWindow + x)] = k[static_cast<std::size_t>(y)] * k[static_cast<std::size_t>(x)];
    return w2;
  }();
  return w;
}

// SSIM of the window with top-left corner (y0, x0). The expression is
// symmetric in (a, b) term by term, so swapping the inputs gives the same bits.
double window_ssim(const Plane& a, const Plane& b, int y0, int x0) {
  const auto& w = window_weights();
  double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
  for (int y = 0; y < kSsimWindow; ++y)
    for (int x = 0; x < kSsimWindow; ++x) {
      const double k = w[static_cast<std::size_t>(y * kSsimWindow + x)];
      const double va = a.at(y0 + y, x0 + x), vb = b.at(y0 + y, x0 + x);
      ma += k * va;
      mb += k * vb;
      saa += k * (va * va);
      sbb += k * (vb * vb);
      sab += k * (va * vb);
    }
  const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
  return ((2.0 * (ma * mb) + kSsimC1) * (2.0 * cov + kSsimC2)) / ((ma * ma + mb * mb + kSsimC1) * (va + vb + kSsimC2));
}

void check_pair(const Image& a, const Image& b) {
  require(a.same_shape(b), "ssim: frames differ in shape");
  require(a.height() >= kSsimWindow && a.width() >= kSsimWindow, "ssim: frames are smaller than the 11x11 window");
}

double to_psnr(double se, std::size_t n) {
  if (se == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(static_cast<double>(n) / se));
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  check_pair(a, b);
  const Plane pa = luma(a), pb = luma(b);
  double sum = 0.0;
  const int ny = pa.h - kSsimWindow + 1, nx = pa.w - kSsimWindow + 1;
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) sum += window_ssim(pa, pb, y, x);
  return sum / (static_cast<double>(ny) * nx);
}

std::optional<double> masked_ssim(const Image& a, const Image& b, const Image& edit_mask) {
  check_pair(a, b);
  require(edit_mask.same_raster(a) && edit_mask.channels() == 1, "bg_ssim: mask does not match the frame");
  const int h = a.height(), w = a.width();
  // Summed-area table of edited pixels.
  std::vector<int> sat(static_cast<std::size_t>((h + 1) * (w + 1)), 0);
  const auto S = [&](int y, int x) -> int& { return sat[static_cast<std::size_t>(y * (w + 1) + x)]; };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) S(y + 1, x + 1) = (edit_mask.at(y, x) > 0.0f) + S(y, x + 1) + S(y + 1, x) - S(y, x);
  const Plane pa = luma(a), pb = luma(b);
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y + kSsimWindow <= h; ++y)
    for (int x = 0; x + kSsimWindow <= w; ++x) {
      const int edited = S(y + kSsimWindow, x + kSsimWindow) - S(y, x + kSsimWindow) - S(y + kSsimWindow, x) + S(y, x);
      if (edited > 0) continue;
      sum += window_ssim(pa, pb, y, x);
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

BgSsim bg_ssim(const Video& gen, const Video& src, const MaskSequence& edit_mask) {
  require(gen.same_shape(src), "bg_ssim: videos differ in shape");
  require(edit_mask.matches(gen), "bg_ssim: mask sequence does not match the videos");
  BgSsim out;
  double sum = 0.0;
  int n = 0;
  for (int t = 0; t < gen.length(); ++t) {
    out.per_frame.push_back(masked_ssim(gen[t], src[t], edit_mask[t]));
    if (out.per_frame.back()) {
      sum += *out.per_frame.back();
      ++n;
    }
  }
  if (n == 0) fail(ErrorKind::data, "bg_ssim: no background windows in any frame (mask covers everything)");
  out.mean = sum / n;
  return out;
}

double psnr(const Video& a, const Video& b) {
  require(a.same_shape(b), "psnr: videos differ in shape");
  double se = 0.0;
  std::size_t n = 0;
  for (int t = 0; t < a.length(); ++t) {
    const auto da = a[t].data(), db = b[t].data();
    for (std::size_t i = 0; i < da.size(); ++i) {
      const double d = static_cast<double>(da[i]) - db[i];
      se += d * d;
    }
    n += da.size();
  }
  return to_psnr(se, n);
}

double background_psnr(const Video& a, const Video& b, const MaskSequence& edit_mask) {
  require(a.same_shape(b), "psnr: videos differ in shape");
  require(edit_mask.matches(a), "psnr: mask sequence does not match the videos");
  double se = 0.0;
  std::size_t n = 0;
  for (int t = 0; t < a.length(); ++t)
    for (int y = 0; y < a.height(); ++y)
      for (int x = 0; x < a.width(); ++x) {
        if (edit_mask[t].at(y, x) > 0.0f) continue;
        for (int c = 0; c < a.channels(); ++c) {
          const double d = static_cast<double>(a[t].at(y, x, c)) - b[t].at(y, x, c);
          se += d * d;
          ++n;
        }
      }
  if (n == 0) fail(ErrorKind::data, "background psnr: mask covers every pixel");
  return to_psnr(se, n);
}

std::vector<double> ToyEmbedder::embed(const Image& frame) const {
  constexpr int G = 8;
  require(frame.height() >= G && frame.width() >= G, "toy embedder: frame smaller than 8x8");
  const int C = frame.channels();
  std::vector<double> v(static_cast<std::size_t>(G * G * C), 0.0);
  for (int gy = 0; gy < G; ++gy)
    for (int gx = 0; gx < G; ++gx) {
      const int y0 = gy * frame.height() / G, y1 = (gy + 1) * frame.height() / G;
      const int x0 = gx * frame.width() / G, x1 = (gx + 1) * frame.width() / G;
      const double area = static_cast<double>((y1 - y0) * (x1 - x0));
      for (int c = 0; c < C; ++c) {
        double s = 0.0;
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) s += frame.at(y, x, c);
        v[static_cast<std::size_t>((gy * G + gx) * C + c)] = s / area;
      }
    }
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double norm = 0.0;
  for (double& x : v) {
    x -= mean;
    norm += x * x;
  }
  if (norm == 0.0) {
    // Flat frames all map to the same unit vector.
    std::fill(v.begin(), v.end(), 0.0);
    v[0] = 1.0;
    return v;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size() && !a.empty(), "cosine: vectors differ in width");
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  require(aa > 0.0 && bb > 0.0, "cosine: zero vector");
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

Series temporal_consistency(const Video& gen, const Image& edited_first, const Embedder& e) {
  require(edited_first.same_shape(gen[0]), "temporal consistency: first frame does not match the video");
  const std::vector<double> ref = e.embed(edited_first);
  Series s;
  for (int t = 0; t < gen.length(); ++t) s.per_frame.push_back(cosine(e.embed(gen[t]), ref));
  for (double v : s.per_frame) s.mean += v;
  s.mean /= static_cast<double>(s.per_frame.size());
  return s;
}

Series frame_consistency(const Video& gen, const Video& src, const Embedder& e) {
  require(gen.same_shape(src), "frame consistency: videos differ in length or shape");
  Series s;
  for (int t = 0; t < gen.length(); ++t) s.per_frame.push_back(cosine(e.embed(gen[t]), e.embed(src[t])));
  for (double v : s.per_frame) s.mean += v;
  s.mean /= static_cast<double>(s.per_frame.size());
  return s;
}

MetricReport evaluate(const EvalInputs& in, const Embedder& e) {
  MetricReport r;
  r.embedder = e.id();
  r.mask_source = in.mask ? in.mask_source : "none";
  r.tc_reference = in.edited_first ? "edited_first" : "generated_first";
  r.frames = in.gen.length();
  r.tc = temporal_consistency(in.gen, in.edited_first ? *in.edited_first : in.gen[0], e);
  r.fc = frame_consistency(in.gen, in.src, e);
  r.psnr = psnr(in.gen, in.src);
  if (in.mask) {
    r.bg_ssim = bg_ssim(in.gen, in.src, *in.mask);
    r.background_psnr = background_psnr(in.gen, in.src, *in.mask);
  }
  return r;
}

}  // namespace nova::metrics
