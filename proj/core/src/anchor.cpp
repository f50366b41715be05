#include "nova/anchor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "nova/error.hpp"
#include "nova/parallel.hpp"

namespace nova::anchor {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

std::string join_indices(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

void DegradationConfig::validate() const {
  require(p_geometric >= 0.0 && p_geometric <= 1.0, "degradation: geometric probability outside [0,1]");
  require(p_appearance >= 0.0 && p_appearance <= 1.0, "degradation: appearance probability outside [0,1]");
  require(zoom_min > 0.0 && zoom_min <= zoom_max, "degradation: invalid zoom range");
  require(stretch_min > 0.0 && stretch_min <= stretch_max, "degradation: invalid stretch range");
  require(rotation_deg >= 0.0 && rotation_deg <= 45.0, "degradation: rotation must lie in [0, 45] degrees");
  require(sigma_min > 0.0 && sigma_min <= sigma_max, "degradation: sigma range must be positive");
  require(blob_min > 0.0 && blob_min <= blob_max && blob_max <= 1.0, "degradation: blob range must lie in (0, 1]");
  require(blob_edge >= 0.0, "degradation: blob edge must be non-negative");
  require(workers >= 1, "degradation: workers must be positive");
}

bool DegradationConfig::enabled(DegradeOp op) const noexcept {
  return std::find(ops.begin(), ops.end(), op) != ops.end();
}

void DegradationLog::write(Manifest& m, const std::string& p) const {
  m.set(p + "geometric", geometric);
  if (geometric) {
    m.set(p + "zoom", warp.zoom);
    m.set(p + "stretch_x", warp.stretch_x);
    m.set(p + "stretch_y", warp.stretch_y);
    m.set(p + "rotation", warp.rotation);
  }
  m.set(p + "appearance", appearance);
  if (appearance) {
    m.set(p + "sigma", sigma);
    m.set(p + "blob_cx", blob.center_x);
    m.set(p + "blob_cy", blob.center_y);
    m.set(p + "blob_rx", blob.radius_x);
    m.set(p + "blob_ry", blob.radius_y);
    m.set(p + "blob_angle", blob.angle);
  }
}

Affine2 zoom_stretch_map(int height, int width, const ZoomStretch& w) {
  // Forward: dst = c + R * S * (src - c). Inverse: src = c + S^-1 * R^T * (dst - c).
  const double sx = w.zoom * w.stretch_x, sy = w.zoom * w.stretch_y;
  const double cs = std::cos(w.rotation), sn = std::sin(w.rotation);
  const double cx = 0.5 * width, cy = 0.5 * height;
  Affine2 m;
  m.a = cs / sx;
  m.b = sn / sx;
  m.c = -sn / sy;
  m.d = cs / sy;
  m.tx = cx - (m.a * cx + m.b * cy);
  m.ty = cy - (m.c * cx + m.d * cy);
  return m;
}

Image blob_mask(int height, int width, const Blob& blob, double edge) {
  Image out(height, width, 1);
  const double cs = std::cos(blob.angle), sn = std::sin(blob.angle);
  const double rmin = std::min(blob.radius_x, blob.radius_y);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double dx = x + 0.5 - blob.center_x, dy = y + 0.5 - blob.center_y;
      const double u = (cs * dx + sn * dy) / blob.radius_x;
      const double v = (-sn * dx + cs * dy) / blob.radius_y;
      // Approximate signed distance to the boundary in pixels.
      const double dist = (std::sqrt(u * u + v * v) - 1.0) * rmin;
      double weight = dist <= 0.0 ? 1.0 : 0.0;
      if (edge > 0.0) weight = std::clamp(0.5 - dist / edge, 0.0, 1.0);
      out.at(y, x) = static_cast<float>(weight);
    }
  return out;
}

Image blur_blend(const Image& frame, const Image& blob, double sigma) {
  return blend(frame, gaussian_blur(frame, sigma), blob);
}

KeyframeSet sample_keyframes(int last_index, int n_interior, Rng& rng) {
  require(last_index >= 1, "sample_keyframes: T must be at least 1");
  require(n_interior >= 0, "sample_keyframes: n_interior must be non-negative");
  require(n_interior <= last_index - 1, "sample_keyframes: n_interior exceeds T - 1");
  std::vector<int> interior(static_cast<std::size_t>(last_index - 1));
  std::iota(interior.begin(), interior.end(), 1);
  // Partial Fisher-Yates: the first n_interior slots become the draw.
  for (int i = 0; i < n_interior; ++i) {
    const auto j = static_cast<std::size_t>(i) + rng.below(interior.size() - static_cast<std::size_t>(i));
    std::swap(interior[static_cast<std::size_t>(i)], interior[j]);
  }
  std::vector<int> idx = {0, last_index};
  idx.insert(idx.end(), interior.begin(), interior.begin() + n_interior);
  std::sort(idx.begin(), idx.end());
  return KeyframeSet(std::move(idx), last_index);
}

DegradedKeyframe degrade_keyframe(const Image& frame, const DegradationConfig& cfg, Rng rng) {
  cfg.validate();
  DegradedKeyframe out{frame, {}};
  // Both coin flips are always drawn so the stream layout is fixed.
  const bool geometric = rng.uniform() < cfg.p_geometric && cfg.enabled(DegradeOp::affine);
  const bool appearance = rng.uniform() < cfg.p_appearance && cfg.enabled(DegradeOp::blur);
  if (geometric) {
    ZoomStretch w;
    w.zoom = rng.uniform(cfg.zoom_min, cfg.zoom_max);
    w.stretch_x = rng.uniform(cfg.stretch_min, cfg.stretch_max);
    w.stretch_y = rng.uniform(cfg.stretch_min, cfg.stretch_max);
    w.rotation = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg) * kDegToRad;
    out.frame = warp_affine(out.frame, zoom_stretch_map(frame.height(), frame.width(), w));
    out.log.geometric = true;
    out.log.warp = w;
  }
  if (appearance) {
    const double area = rng.uniform(cfg.blob_min, cfg.blob_max) * frame.height() * frame.width();
    const double aspect = std::exp(rng.uniform(std::log(0.5), std::log(2.0)));
    Blob b;
    b.radius_x = std::sqrt(area / std::numbers::pi * aspect);
    b.radius_y = std::sqrt(area / std::numbers::pi / aspect);
    b.center_x = rng.uniform(0.0, frame.width());
    b.center_y = rng.uniform(0.0, frame.height());
    b.angle = rng.uniform(0.0, std::numbers::pi);
    const double sigma = rng.uniform(cfg.sigma_min, cfg.sigma_max);
    out.frame = blur_blend(out.frame, blob_mask(frame.height(), frame.width(), b, cfg.blob_edge), sigma);
    out.log.appearance = true;
    out.log.sigma = sigma;
    out.log.blob = b;
  }
  out.frame.clamp01();
  return out;
}

Video interpolate_reference(const std::map<int, Image>& keyframes, int last_index, int workers) {
  if (!keyframes.contains(0) || !keyframes.contains(last_index))
    fail(ErrorKind::precondition, "interpolate_reference: keyframes must include 0 and T");
  std::vector<int> keys;
  for (const auto& [k, img] : keyframes) {
    require(k >= 0 && k <= last_index, "interpolate_reference: keyframe index outside [0, T]");
    require(img.same_shape(keyframes.begin()->second), "interpolate_reference: keyframe shape mismatch");
    keys.push_back(k);
  }
  const KeyframeSet set(keys, last_index);

  std::vector<Image> frames(static_cast<std::size_t>(last_index + 1));
  parallel_for(frames.size(), workers, [&](std::size_t ti) {
    const int t = static_cast<int>(ti);
    const auto hi = std::lower_bound(keys.begin(), keys.end(), t);
    if (*hi == t) {
      frames[ti] = keyframes.at(t);
      return;
    }
    const int k1 = *hi, k0 = *(hi - 1);
    const double alpha = static_cast<double>(t - k0) / static_cast<double>(k1 - k0);
    const Image& a = keyframes.at(k0);
    const Image& b = keyframes.at(k1);
    Image out(a.height(), a.width(), a.channels());
    auto src_a = a.data(), src_b = b.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      const float va = src_a[i], vb = src_b[i];
      const auto v = static_cast<float>((1.0 - alpha) * va + alpha * vb);
      // Rounding must not leave the bracketing interval.
      dst[i] = std::clamp(v, std::min(va, vb), std::max(va, vb));
    }
    frames[ti] = std::move(out);
  });
  return Video(std::move(frames));
}

Manifest DegradedReference::manifest() const {
  Manifest m;
  m.set("keyframes", join_indices(keyframes.indices()));
  for (const auto& entry : log) entry.write(m, "keyframe." + std::to_string(entry.index) + ".");
  return m;
}

DegradedReference build_degraded_reference(const Video& target, const DegradationConfig& cfg, KeyframeMode mode,
                                           const Rng& rng) {
  require(!target.empty(), "build_degraded_reference: empty target");
  cfg.validate();
  const int last = target.last_index();
  Rng pick = rng.fork(Stage::anchor_keyframes);
  KeyframeSet keys = mode.kind == KeyframeMode::Kind::fixed ? KeyframeSet::fixed_interval(last, mode.value)
                                                            : sample_keyframes(last, mode.value, pick);

  const auto& idx = keys.indices();
  std::vector<DegradedKeyframe> degraded(idx.size());
  parallel_for(idx.size(), cfg.workers, [&](std::size_t i) {
    const int k = idx[i];
    if (k == 0) {
      // Frame 0 anchors every edit and is never corrupted.
      degraded[i] = DegradedKeyframe{target[0], {}};
      return;
    }
    degraded[i] = degrade_keyframe(target[k], cfg, rng.fork(Stage::anchor_degrade, static_cast<std::uint64_t>(k)));
    degraded[i].log.index = k;
  });

  DegradedReference out{Video(), keys, {}, {}};
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.anchors.emplace(idx[i], std::move(degraded[i].frame));
    if (idx[i] != 0) out.log.push_back(degraded[i].log);
  }
  out.video = interpolate_reference(out.anchors, last, cfg.workers);
  return out;
}

}  // namespace nova::anchor
