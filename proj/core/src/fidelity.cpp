#include "nova/fidelity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "nova/error.hpp"
#include "nova/image_ops.hpp"
#include "nova/parallel.hpp"

namespace nova::fidelity {
namespace {

constexpr int kMaxSetupAttempts = 32;

struct SemiAxes {
  double a;
  double b;
};

SemiAxes semi_axes(const MaskShapeSpec& spec, double scale, int height, int width) {
  const double radius = 0.5 * spec.base_size * std::min(height, width) * scale;
  const double root = std::sqrt(spec.aspect);
  return {radius * root, radius / root};
}

bool inside_convex(const std::vector<std::array<double, 2>>& verts, const SemiAxes& ax, double u, double w) {
  const std::size_t n = verts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = verts[i];
    const auto& q = verts[(i + 1) % n];
    const double px = p[0] * ax.a, py = p[1] * ax.b;
    const double qx = q[0] * ax.a, qy = q[1] * ax.b;
    if ((qx - px) * (w - py) - (qy - py) * (u - px) < 0.0) return false;
  }
  return true;
}

std::vector<double> convex_angles(Rng& rng, int count) {
  // Sorted angular samples; redrawn until no gap reaches pi so the polygon
  // contains its center and keeps a usable area.
  for (;;) {
    std::vector<double> angles(static_cast<std::size_t>(count));
    for (double& a : angles) a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    std::sort(angles.begin(), angles.end());
    double max_gap = angles.front() + 2.0 * std::numbers::pi - angles.back();
    for (std::size_t i = 1; i < angles.size(); ++i) max_gap = std::max(max_gap, angles[i] - angles[i - 1]);
    if (max_gap < 0.9 * std::numbers::pi) return angles;
  }
}

}  // namespace

const char* to_string(ShapeKind kind) noexcept {
  switch (kind) {
    case ShapeKind::rectangle:
      return "rectangle";
    case ShapeKind::ellipse:
      return "ellipse";
    case ShapeKind::polygon:
      return "polygon";
  }
  return "unknown";
}

void MaskShapeSpec::validate() const {
  require(base_size > 0.0 && base_size < 1.0, "mask shape: base size must be in (0, 1)");
  require(aspect > 0.0 && std::isfinite(aspect), "mask shape: aspect must be positive");
  if (kind == ShapeKind::polygon) require(vertices.size() >= 3, "mask shape: polygon needs at least 3 vertices");
}

MaskShapeSpec MaskShapeSpec::rectangle(double base_size, double aspect) {
  MaskShapeSpec s{ShapeKind::rectangle, base_size, aspect, {}};
  s.validate();
  return s;
}

MaskShapeSpec MaskShapeSpec::ellipse(double base_size, double aspect) {
  MaskShapeSpec s{ShapeKind::ellipse, base_size, aspect, {}};
  s.validate();
  return s;
}

MaskShapeSpec MaskShapeSpec::polygon(double base_size, std::vector<double> angles, double aspect) {
  std::sort(angles.begin(), angles.end());
  MaskShapeSpec s{ShapeKind::polygon, base_size, aspect, {}};
  for (double a : angles) s.vertices.push_back({std::cos(a), std::sin(a)});
  s.validate();
  return s;
}

HalfExtents bounding_half_extents(const MaskShapeSpec& spec, const MaskMotionState& state, int height, int width) {
  const auto ax = semi_axes(spec, state.scale, height, width);
  const double c = std::cos(state.rotation), s = std::sin(state.rotation);
  switch (spec.kind) {
    case ShapeKind::rectangle:
      return {std::fabs(c) * ax.a + std::fabs(s) * ax.b, std::fabs(s) * ax.a + std::fabs(c) * ax.b};
    case ShapeKind::ellipse:
      return {std::sqrt(ax.a * ax.a * c * c + ax.b * ax.b * s * s), std::sqrt(ax.a * ax.a * s * s + ax.b * ax.b * c * c)};
    case ShapeKind::polygon: {
      HalfExtents h{0.0, 0.0};
      for (const auto& v : spec.vertices) {
        const double x = v[0] * ax.a, y = v[1] * ax.b;
        h.x = std::max(h.x, std::fabs(c * x - s * y));
        h.y = std::max(h.y, std::fabs(s * x + c * y));
      }
      return h;
    }
  }
  return {0.0, 0.0};
}

MaskRaster rasterize_mask(const MaskShapeSpec& spec, const MaskMotionState& state, int height, int width) {
  spec.validate();
  require(state.scale > 0.0, "rasterize_mask: scale must be positive");
  const auto ax = semi_axes(spec, state.scale, height, width);
  const double c = std::cos(state.rotation), s = std::sin(state.rotation);
  MaskRaster out{Image(height, width, 1), 0};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = x + 0.5 - state.position[0];
      const double dy = y + 0.5 - state.position[1];
      // Into shape coordinates: rotate by -theta.
      const double u = c * dx + s * dy;
      const double w = -s * dx + c * dy;
      bool in = false;
      switch (spec.kind) {
        case ShapeKind::rectangle:
          in = std::fabs(u) <= ax.a && std::fabs(w) <= ax.b;
          break;
        case ShapeKind::ellipse:
          in = (u * u) / (ax.a * ax.a) + (w * w) / (ax.b * ax.b) <= 1.0;
          break;
        case ShapeKind::polygon:
          in = inside_convex(spec.vertices, ax, u, w);
          break;
      }
      if (in) {
        out.mask.at(y, x) = 1.0f;
        ++out.area;
      }
    }
  }
  return out;
}

MaskMotionState step_motion(const MaskShapeSpec& spec, const MaskMotionState& state, int height, int width) {
  MaskMotionState next = state;
  next.rotation = state.rotation + state.spin;
  const auto half = bounding_half_extents(spec, next, height, width);
  const double extent[2] = {half.x, half.y};
  const double size[2] = {static_cast<double>(width), static_cast<double>(height)};
  for (int axis = 0; axis < 2; ++axis) {
    double v = state.velocity[axis];
    double p = state.position[axis] + v;
    const bool exits_low = v < 0.0 && p - extent[axis] < 0.0;
    const bool exits_high = v > 0.0 && p + extent[axis] > size[axis];
    if (exits_low || exits_high) {
      v = -v;
      p = state.position[axis] + v;
    }
    // Shapes wider than the frame can still overshoot; keep the center inside
    // so the bounding box always intersects the frame.
    next.velocity[axis] = v;
    next.position[axis] = std::clamp(p, 0.0, size[axis]);
  }
  return next;
}

int pingpong_index(long long t, int length) {
  require(length >= 1, "pingpong_index: length must be at least 1");
  require(t >= 0, "pingpong_index: t must be non-negative");
  if (length == 1) return 0;
  const long long period = 2LL * (length - 1);
  const long long r = t % period;
  return static_cast<int>(r < length ? r : period - r);
}

void FidelityConfig::validate() const {
  require(size_min > 0.0 && size_min <= size_max && size_max < 1.0, "fidelity: size range must lie in (0, 1)");
  require(aspect_min > 0.0 && aspect_min <= aspect_max, "fidelity: invalid aspect range");
  require(speed_min >= 0.0 && speed_min <= speed_max, "fidelity: invalid speed range");
  require(spin_min <= spin_max && std::fabs(spin_min) <= 1.0 && std::fabs(spin_max) <= 1.0,
          "fidelity: spin range must lie in [-1, 1] rad/frame");
  require(scale_min > 0.0 && scale_min <= scale_max, "fidelity: invalid scale range");
  require(vertices_min >= 3 && vertices_min <= vertices_max && vertices_max <= 64,
          "fidelity: vertex range must lie in [3, 64]");
  require(workers >= 1, "fidelity: workers must be positive");
}

Image composite(const Image& target, const Image& filler, const Image& mask) {
  require(target.same_shape(filler), "composite: target and filler shapes differ");
  require(mask.channels() == 1 && mask.same_raster(target), "composite: mask raster mismatch");
  Image out(target.height(), target.width(), target.channels());
  for (int y = 0; y < target.height(); ++y)
    for (int x = 0; x < target.width(); ++x) {
      const float m = mask.at(y, x);
      for (int c = 0; c < target.channels(); ++c)
        out.at(y, x, c) = m * filler.at(y, x, c) + (1.0f - m) * target.at(y, x, c);
    }
  return out;
}

Video conform_filler(const Video& filler, int height, int width, int channels) {
  if (filler.height() == height && filler.width() == width && filler.channels() == channels) return filler;
  std::vector<Image> frames;
  frames.reserve(static_cast<std::size_t>(filler.length()));
  for (const auto& f : filler.frames()) {
    Image r = convert_channels(resize_bilinear(f, height, width), channels);
    r.clamp01();
    frames.push_back(std::move(r));
  }
  return Video(std::move(frames));
}

PseudoSource synth_pseudo_source(const Video& target, std::span<const Video> pool, const FidelityConfig& cfg) {
  return synth_pseudo_source(target, pool, cfg, Rng(cfg.seed));
}

PseudoSource synth_pseudo_source(const Video& target, std::span<const Video> pool, const FidelityConfig& cfg,
                                 const Rng& rng) {
  require(!target.empty(), "synth_pseudo_source: empty target");
  if (pool.empty()) fail(ErrorKind::data, "synth_pseudo_source: filler pool is empty");
  cfg.validate();
  const int h = target.height(), w = target.width(), n = target.length();

  for (int attempt = 0; attempt < kMaxSetupAttempts; ++attempt) {
    Rng setup = rng.fork(Stage::fidelity_setup, static_cast<std::uint64_t>(attempt));
    const std::size_t filler_index = setup.below(pool.size());
    const Video filler = conform_filler(pool[filler_index], h, w, target.channels());

    ShapeKind kind = ShapeKind::rectangle;
    switch (cfg.shape) {
      case ShapeChoice::random:
        kind = static_cast<ShapeKind>(setup.below(3));
        break;
      case ShapeChoice::rectangle:
        kind = ShapeKind::rectangle;
        break;
      case ShapeChoice::ellipse:
        kind = ShapeKind::ellipse;
        break;
      case ShapeChoice::polygon:
        kind = ShapeKind::polygon;
        break;
    }
    const double base = setup.uniform(cfg.size_min, cfg.size_max);
    const double aspect = setup.uniform(cfg.aspect_min, cfg.aspect_max);
    MaskShapeSpec shape;
    if (kind == ShapeKind::polygon) {
      const int verts = cfg.vertices_min + static_cast<int>(setup.below(
                                               static_cast<std::uint64_t>(cfg.vertices_max - cfg.vertices_min + 1)));
      shape = MaskShapeSpec::polygon(base, convex_angles(setup, verts), aspect);
    } else {
      shape = MaskShapeSpec{kind, base, aspect, {}};
      shape.validate();
    }

    MaskMotionState state;
    state.scale = setup.uniform(cfg.scale_min, cfg.scale_max);
    state.rotation = setup.uniform(0.0, 2.0 * std::numbers::pi);
    state.spin = setup.uniform(cfg.spin_min, cfg.spin_max);
    const auto half = bounding_half_extents(shape, state, h, w);
    const auto place = [&](double extent, int size) {
      return extent * 2.0 < size ? setup.uniform(extent, size - extent) : 0.5 * size;
    };
    state.position = {place(half.x, w), place(half.y, h)};
    const double speed = setup.uniform(cfg.speed_min, cfg.speed_max) * w / 64.0;
    const double heading = setup.uniform(0.0, 2.0 * std::numbers::pi);
    state.velocity = {speed * std::cos(heading), speed * std::sin(heading)};

    const int start = filler.length() > n ? static_cast<int>(setup.below(static_cast<std::uint64_t>(filler.length() - n + 1))) : 0;

    std::vector<MaskMotionState> states(static_cast<std::size_t>(n));
    states[0] = state;
    for (int t = 1; t < n; ++t) states[static_cast<std::size_t>(t)] = step_motion(shape, states[static_cast<std::size_t>(t - 1)], h, w);

    std::vector<MaskRaster> rasters(static_cast<std::size_t>(n));
    std::vector<Image> out(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), cfg.workers, [&](std::size_t t) {
      rasters[t] = rasterize_mask(shape, states[t], h, w);
      const int fi = start + pingpong_index(static_cast<long long>(t), filler.length() - start);
      out[t] = composite(target[static_cast<int>(t)], filler[fi], rasters[t].mask);
    });
    if (std::any_of(rasters.begin(), rasters.end(), [](const MaskRaster& r) { return r.degenerate(); })) continue;

    std::vector<Image> masks;
    masks.reserve(rasters.size());
    for (auto& r : rasters) masks.push_back(std::move(r.mask));

    Manifest log;
    log.set("attempt", attempt);
    log.set("filler_index", static_cast<std::uint64_t>(filler_index));
    log.set("filler_start", start);
    log.set("shape", to_string(kind));
    log.set("base_size", base);
    log.set("aspect", aspect);
    if (kind == ShapeKind::polygon) log.set("vertices", static_cast<std::int64_t>(shape.vertices.size()));
    log.set("scale", state.scale);
    log.set("position_x", state.position[0]);
    log.set("position_y", state.position[1]);
    log.set("velocity_x", state.velocity[0]);
    log.set("velocity_y", state.velocity[1]);
    log.set("rotation", state.rotation);
    log.set("spin", state.spin);
    return PseudoSource{Video(std::move(out)), MaskSequence(std::move(masks)), std::move(shape), std::move(states),
                        std::move(log)};
  }
  fail(ErrorKind::data, "synth_pseudo_source: could not place a non-degenerate mask after " +
                            std::to_string(kMaxSetupAttempts) + " attempts");
}

}  // namespace nova::fidelity
