#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "nova/error.hpp"
#include "nova/fidelity.hpp"
#include "nova/moving_shapes.hpp"

using namespace nova;
using namespace nova::fidelity;

namespace {

MaskMotionState at(double x, double y, double vx = 0, double vy = 0) {
  MaskMotionState s;
  s.position = {x, y};
  s.velocity = {vx, vy};
  return s;
}

bool box_meets_frame(const MaskShapeSpec& spec, const MaskMotionState& s, int h, int w) {
  const HalfExtents e = bounding_half_extents(spec, s, h, w);
  return s.position[0] + e.x > 0 && s.position[0] - e.x < w && s.position[1] + e.y > 0 && s.position[1] - e.y < h;
}

}  // namespace

TEST_SUITE("fidelity") {

TEST_CASE("centered rectangle of size 0.5 covers a quarter of the frame") {
  const auto r = rasterize_mask(MaskShapeSpec::rectangle(0.5), at(32, 32), 64, 64);
  CHECK(std::abs(static_cast<double>(r.area) / (64 * 64) - 0.25) <= 0.02);
  CHECK_FALSE(r.degenerate());
}

TEST_CASE("rotating a centered rectangle by pi gives the same mask") {
  const auto spec = MaskShapeSpec::rectangle(0.4, 1.5);
  MaskMotionState s = at(32, 32);
  const auto a = rasterize_mask(spec, s, 64, 64);
  s.rotation = std::numbers::pi;
  const auto b = rasterize_mask(spec, s, 64, 64);
  CHECK(a.mask == b.mask);
}

TEST_CASE("a shape far outside the frame is degenerate") {
  const auto r = rasterize_mask(MaskShapeSpec::ellipse(0.3), at(-500, 20), 64, 64);
  CHECK(r.degenerate());
  CHECK(r.area == 0);
}

TEST_CASE("masks are binary for every shape kind") {
  const MaskShapeSpec specs[] = {MaskShapeSpec::rectangle(0.3), MaskShapeSpec::ellipse(0.3, 0.7),
                                 MaskShapeSpec::polygon(0.4, {0.0, 2.0, 4.0})};
  for (const auto& spec : specs) {
    MaskMotionState s = at(20, 30);
    s.rotation = 0.7;
    const auto r = rasterize_mask(spec, s, 48, 64);
    std::size_t count = 0;
    for (float v : r.mask.data()) {
      CHECK((v == 0.0f || v == 1.0f));
      count += v == 1.0f;
    }
    CHECK(count == r.area);
  }
}

TEST_CASE("bounce reflects the outward velocity component") {
  // Half width 4 px on a 64 px frame: base size 8 / 64.
  const auto spec = MaskShapeSpec::rectangle(0.125);
  const auto next = step_motion(spec, at(5, 5, -10, 0), 64, 64);
  CHECK(next.velocity[0] == 10.0);
  CHECK(next.velocity[1] == 0.0);
  CHECK(next.position[0] == 15.0);
  CHECK(box_meets_frame(spec, next, 64, 64));
}

TEST_CASE("zero velocity and spin is a fixed point") {
  const auto spec = MaskShapeSpec::ellipse(0.3);
  MaskMotionState s = at(20, 21);
  s.rotation = 0.3;
  const auto next = step_motion(spec, s, 64, 64);
  CHECK(next.position == s.position);
  CHECK(next.rotation == s.rotation);
  CHECK(next.velocity == s.velocity);
}

TEST_CASE("1000 steps at max speed keep the bounding box on the frame") {
  FidelityConfig cfg;
  const double v = cfg.max_speed(64);
  for (const auto& spec : {MaskShapeSpec::rectangle(0.15, 0.6), MaskShapeSpec::ellipse(0.45, 1.6),
                           MaskShapeSpec::polygon(0.3, {0.1, 1.9, 3.3, 5.0})}) {
    MaskMotionState s = at(32, 32, v * 0.8, v * 0.6);
    s.spin = 0.05;
    for (int i = 0; i < 1000; ++i) {
      s = step_motion(spec, s, 64, 64);
      REQUIRE(box_meets_frame(spec, s, 64, 64));
    }
  }
}

TEST_CASE("pingpong indexing reflects at both ends") {
  std::vector<int> seq;
  for (int t = 0; t <= 6; ++t) seq.push_back(pingpong_index(t, 4));
  CHECK(seq == std::vector<int>{0, 1, 2, 3, 2, 1, 0});
  CHECK(pingpong_index(12345, 1) == 0);
  for (int L = 2; L < 9; ++L) CHECK(pingpong_index(2 * (L - 1), L) == 0);
}

TEST_CASE("compositing with all-zero or all-one masks returns an input") {
  Rng r(1);
  const Image x = test::random_image(r, 8, 8, 3), y = test::random_image(r, 8, 8, 3);
  CHECK(composite(x, y, Image(8, 8, 1, 0.0f)) == x);
  CHECK(composite(x, y, Image(8, 8, 1, 1.0f)) == y);
}

TEST_CASE("compositing matches a scalar per-pixel oracle") {
  Rng r(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Image x = test::random_image(r, 8, 8, 3), y = test::random_image(r, 8, 8, 3);
    const Image m = test::random_binary(r, 8, 8);
    const Image out = composite(x, y, m);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j)
        for (int c = 0; c < 3; ++c) {
          const float mv = m.at(i, j);
          REQUIRE(out.at(i, j, c) == mv * y.at(i, j, c) + (1.0f - mv) * x.at(i, j, c));
        }
  }
}

TEST_CASE("pseudo-source keeps the target outside the mask and the filler inside") {
  Rng r(3);
  const Video target = test::random_video(r, 9, 16, 16, 3);
  const std::vector<Video> pool = {test::random_video(r, 4, 16, 16, 3), test::random_video(r, 12, 16, 16, 3)};
  FidelityConfig cfg;
  cfg.seed = 11;
  const PseudoSource ps = synth_pseudo_source(target, pool, cfg);
  REQUIRE(ps.masks.binary());
  REQUIRE(ps.masks.matches(target));
  for (int t = 0; t < target.length(); ++t)
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 16; ++j)
        if (ps.masks[t].at(i, j) == 0.0f)
          for (int c = 0; c < 3; ++c) REQUIRE(ps.video[t].at(i, j, c) == target[t].at(i, j, c));
  CHECK(ps.log.contains("filler_index"));
}

TEST_CASE("mask centroids move at most the sampled speed plus a bounce") {
  const auto clip = shapes::generate_clip(shapes::ClipSpec{}, Rng(1)).video;
  const std::vector<Video> pool = {clip};
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    FidelityConfig cfg;
    cfg.seed = seed;
    const auto ps = synth_pseudo_source(clip, pool, cfg);
    for (std::size_t t = 1; t < ps.states.size(); ++t) {
      const double dx = ps.states[t].position[0] - ps.states[t - 1].position[0];
      const double dy = ps.states[t].position[1] - ps.states[t - 1].position[1];
      const double speed = std::hypot(ps.states[t - 1].velocity[0], ps.states[t - 1].velocity[1]);
      CHECK(std::hypot(dx, dy) <= speed + 1e-9);
    }
  }
}

TEST_CASE("pseudo-source synthesis is deterministic for any worker count") {
  Rng r(4);
  const Video target = test::random_video(r, 6, 16, 16, 3);
  const std::vector<Video> pool = {test::random_video(r, 5, 8, 8, 1)};
  FidelityConfig a;
  a.seed = 5;
  FidelityConfig b = a;
  b.workers = 3;
  const auto x = synth_pseudo_source(target, pool, a), y = synth_pseudo_source(target, pool, b);
  CHECK(x.video == y.video);
  CHECK(x.masks == y.masks);
  CHECK(x.log == y.log);
}

TEST_CASE("fillers are conformed to the target raster") {
  Rng r(5);
  const Video f = test::random_video(r, 3, 8, 6, 1);
  const Video c = conform_filler(f, 16, 12, 3);
  CHECK(c.height() == 16);
  CHECK(c.width() == 12);
  CHECK(c.channels() == 3);
}

TEST_CASE("invalid configurations are rejected") {
  FidelityConfig cfg;
  cfg.size_min = 0.6;
  cfg.size_max = 0.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  Rng r(6);
  const Video target = test::random_video(r, 3, 8, 8, 3);
  CHECK_THROWS_AS(synth_pseudo_source(target, std::vector<Video>{}, FidelityConfig{}), Error);
}

}
