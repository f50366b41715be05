#include <doctest.h>

#include <cmath>
#include <set>

#include "gradcheck.hpp"
#include "helpers.hpp"
#include "nova/denoiser/checkpoint.hpp"
#include "nova/denoiser/model.hpp"
#include "nova/error.hpp"
#include "nova/moving_shapes.hpp"

using namespace nova;
using namespace nova::denoiser;

namespace {

template <typename S>
double max_abs(const Mat<S>& a, const Mat<S>& b) {
  return static_cast<double>((a - b).cwiseAbs().maxCoeff());
}

Video toy_clip(std::uint64_t seed, const ModelConfig& c) {
  shapes::ClipSpec spec;
  spec.height = c.height;
  spec.width = c.width;
  spec.frames = c.frames;
  spec.channels = c.channels;
  return shapes::generate_clip(spec, Rng(seed)).video;
}

ModelConfig small_config() {
  ModelConfig c;
  c.height = 8;
  c.width = 8;
  c.frames = 3;
  c.patch = 4;
  c.dim = 48;
  c.layers = 2;
  c.heads = 2;
  c.mlp_ratio = 2;
  c.schedule_steps = 10;
  return c;
}

}  // namespace

TEST_SUITE("denoiser") {

TEST_CASE("default toy dims give 272 tokens of width 64") {
  const ModelConfig c;
  const auto p = init_params<float>(c, 1);
  const auto grid = encode(toy_clip(1, c), p);
  CHECK(grid.tokens.rows() == 17 * 4 * 4);
  CHECK(grid.tokens.cols() == 64);
}

TEST_CASE("indivisible dimensions are rejected") {
  ModelConfig c;
  CHECK_THROWS_AS(geometry_for(c, 17, 18, 16), Error);
  c.patch_t = 2;
  CHECK_THROWS_AS(geometry_for(c, 17, 16, 16), Error);
  c.heads = 5;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("a zero video with zero codec bias encodes to the position encoding") {
  const ModelConfig c;
  auto p = init_params<float>(c, 1);
  p[p.layout.codec_bias].setZero();
  std::vector<Image> frames(17, Image(16, 16, 3, 0.0f));
  const auto grid = encode(Video(frames), p);
  CHECK(max_abs<float>(grid.tokens, position_encoding<float>(grid.geometry, c.dim)) == 0.0);
}

TEST_CASE("the identity codec reconstructs exactly in 64-bit mode") {
  const ModelConfig c;
  const Video v = toy_clip(3, c);
  const auto pd = init_params<double>(c, 1);
  CHECK(test::max_abs_diff(decode(encode(v, pd), pd), v) == 0.0);
  // Float tokens round the position encoding sum; the error stays at one ulp.
  const auto p = init_params<float>(c, 1);
  CHECK(test::max_abs_diff(decode(encode(v, p), p), v) <= 1.2e-7);
}

TEST_CASE("patchify and unpatchify are inverse") {
  ModelConfig c = small_config();
  c.patch = 2;
  c.patch_t = 3;
  Rng r(1);
  const Video v = test::random_video(r, 3, 8, 8, 3);
  const auto g = geometry_for(c, 3, 8, 8);
  CHECK(Video(unpatchify(patchify<float>(v, g), g)) == v);
}

TEST_CASE("position encoding rows are distinct") {
  const ModelConfig c;
  const auto g = geometry_for(c, 17, 16, 16);
  const auto pe = position_encoding<double>(g, 64);
  for (int i = 0; i < pe.rows(); ++i)
    for (int j = i + 1; j < pe.rows(); ++j) REQUIRE((pe.row(i) - pe.row(j)).norm() > 1e-3);
}

TEST_CASE("zero-initialized branches leave the main branch unchanged") {
  for (auto sparse : {SparseMode::additive, SparseMode::cross})
    for (auto dense : {DenseMode::independent, DenseMode::shared, DenseMode::off}) {
      ModelConfig c = small_config();
      c.sparse = sparse;
      c.dense = dense;
      const auto p = init_params<float>(c, 4);
      const auto z = encode(toy_clip(1, c), p);
      const auto ref = encode(toy_clip(2, c), p);
      const auto src = encode(toy_clip(3, c), p);
      const auto with = forward(p, z, 5, ref, src, {true, true});
      const auto without = forward(p, z, 5, ref, src, {false, false});
      CHECK(max_abs<float>(with, without) == 0.0);
    }
}

TEST_CASE("trained branches change the output") {
  auto p = init_params<double>(small_config(), 4);
  Rng r(1);
  for (auto& v : p.values)
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] += 0.1 * r.normal();
  const auto c = p.config;
  const auto z = encode(toy_clip(1, c), p), ref = encode(toy_clip(2, c), p);
  const auto a = forward(p, z, 5, ref, encode(toy_clip(3, c), p));
  const auto b = forward(p, z, 5, ref, encode(toy_clip(4, c), p));
  CHECK(max_abs<double>(a, b) > 0.0);
  CHECK(max_abs<double>(a, forward(p, z, 5, ref, encode(toy_clip(3, c), p), {true, false})) > 0.0);
}

TEST_CASE("relative offsets index a table that covers every clamped token offset") {
  const ModelConfig c = small_config();  // 3 x 2 x 2 tokens
  CHECK(c.relative_offset_count() == 5 * 3 * 3);
  std::set<int> seen;
  for (int dt = -2; dt <= 2; ++dt)
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) seen.insert(c.relative_offset_index(dt, dr, dc));
  CHECK(seen.size() == 45u);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == 44);
  CHECK(c.relative_offset_index(9, -9, 0) == c.relative_offset_index(2, -1, 0));

  const TokenGeometry g = geometry_for(c, 3, 8, 8);
  const auto off = relative_offsets(c, g);
  REQUIRE(off->rows() == g.count());
  for (int i = 0; i < g.count(); ++i) CHECK((*off)(i, i) == c.relative_offset_index(0, 0, 0));
  // Pairs related by the same shift share a class.
  CHECK((*off)(0, 5) == (*off)(2, 7));
}

TEST_CASE("the initial cross-attention bias peaks at zero offset") {
  const auto p = init_params<double>(small_config(), 3);
  const int centre = p.config.relative_offset_index(0, 0, 0);
  for (const auto& x : p.layout.cross) {
    const Mat<double>& table = p[x.pos];
    for (Eigen::Index h = 0; h < table.rows(); ++h) {
      CHECK(table(h, centre) == 0.0);
      CHECK(table.row(h).maxCoeff() == 0.0);
      CHECK(table(h, p.config.relative_offset_index(1, 0, 0)) < 0.0);
    }
  }
}

TEST_CASE("cross-attention is invariant to a joint permutation of keys and values") {
  auto p = init_params<double>(small_config(), 5);
  Rng r(2);
  for (auto& v : p.values)
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] += 0.2 * r.normal();
  const auto& idx = p.layout.cross.front();
  Mat<double> q(6, 48), ctx(10, 48);
  for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = r.normal();
  for (Eigen::Index i = 0; i < ctx.size(); ++i) ctx.data()[i] = r.normal();
  Mat<double> perm(10, 48);
  for (int i = 0; i < 10; ++i) perm.row(i) = ctx.row((i * 3 + 7) % 10);
  CrossCache<double> c1, c2;
  const auto a = cross_forward(p, idx, q, ctx, c1);
  const auto b = cross_forward(p, idx, q, perm, c2);
  CHECK(max_abs<double>(a, b) < 1e-12);
}

TEST_CASE("finite differences agree with backprop in every branch variant") {
  struct Variant {
    SparseMode sparse;
    DenseMode dense;
    std::vector<ParamGroup> skip;
  };
  // A shared dense branch reuses the main weights without gradient, so the
  // main group's derivative differs from the numeric one by design.
  const Variant variants[] = {{SparseMode::additive, DenseMode::independent, {}},
                              {SparseMode::cross, DenseMode::independent, {}},
                              {SparseMode::additive, DenseMode::shared, {ParamGroup::main}},
                              {SparseMode::cross, DenseMode::off, {}}};
  for (const auto& v : variants) {
    ModelConfig c = test::gradcheck_config();
    c.sparse = v.sparse;
    c.dense = v.dense;
    const auto r = test::gradient_check(c, 60, 11, 1e-5, 1e-6, v.skip);
    INFO(to_string(v.sparse), "/", to_string(v.dense), " worst at ", r.worst_name);
    CHECK(r.worst_relative < 1e-4);
  }
}

TEST_CASE("freezing every group zeroes every gradient") {
  const ModelConfig c = test::gradcheck_config();
  auto p = init_params<double>(c, 1);
  for (int g = 0; g < kGroupCount; ++g) p.set_frozen(static_cast<ParamGroup>(g), true);
  TrainingSample s;
  shapes::ClipSpec spec;
  spec.height = 8;
  spec.width = 8;
  spec.frames = 5;
  spec.channels = 1;
  s.target = s.pseudo_source = s.reference = shapes::generate_clip(spec, Rng(1)).video;
  s.timestep = 3;
  s.noise = Mat<float>::Ones(80, 8);
  const auto out = loss(s, p, NoiseSchedule::cosine(10));
  CHECK(out.loss > 0.0);
  for (const auto& g : out.grads) CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a predictor that returns the injected noise has zero loss") {
  Rng r(3);
  Mat<double> x0(50, 8), eps(50, 8);
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    x0.data()[i] = r.normal();
    eps.data()[i] = r.normal();
  }
  const auto schedule = NoiseSchedule::cosine(100);
  CHECK(diffusion_loss<double>(x0, eps, 40, schedule, [&](const Mat<double>&, int) { return eps; }) == 0.0);
}

TEST_CASE("a zero predictor has loss near one") {
  Rng r(4);
  const int n = 10000;
  Mat<double> x0(n / 10, 10), eps(n / 10, 10);
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    x0.data()[i] = r.uniform();
    eps.data()[i] = r.normal();
  }
  const auto schedule = NoiseSchedule::cosine(100);
  const double l = diffusion_loss<double>(x0, eps, 70, schedule,
                                          [](const Mat<double>& z, int) { return Mat<double>::Zero(z.rows(), z.cols()); });
  CHECK(std::abs(l - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("cosine schedule is strictly decreasing inside (0, 1)") {
  const auto s = NoiseSchedule::cosine(100);
  CHECK(s.steps() == 100);
  CHECK(s.alpha_bar(0) < 1.0);
  CHECK(s.alpha_bar(0) > 0.99);
  CHECK(s.alpha_bar(99) > 0.0);
  CHECK(s.alpha_bar(99) < 0.01);
  for (int t = 1; t < 100; ++t) CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
  CHECK(s.sampling_steps(5) == std::vector<int>{99, 74, 50, 25, 0});
  CHECK(NoiseSchedule::cosine(1).sampling_steps(1) == std::vector<int>{0});
  CHECK_THROWS_AS(NoiseSchedule({0.5, 0.6}), Error);
}

TEST_CASE("noised white noise has the predicted variance") {
  const auto s = NoiseSchedule::cosine(100);
  Rng r(5);
  const int n = 10000;
  const double var_x = 4.0;
  Mat<double> x0(n, 1), eps(n, 1);
  for (int i = 0; i < n; ++i) {
    x0(i, 0) = 2.0 * r.normal();
    eps(i, 0) = r.normal();
  }
  for (int t : {0, 20, 50, 80, 99}) {
    const Mat<double> z = add_noise<double>(x0, eps, t, s);
    const double mean = z.mean();
    const double var = (z.array() - mean).square().sum() / (n - 1);
    const double expected = s.alpha_bar(t) * var_x + (1.0 - s.alpha_bar(t));
    CHECK(std::abs(var / expected - 1.0) < 0.05);
  }
}

TEST_CASE("parameter layout depends on the branch variant") {
  ModelConfig c = small_config();
  const auto full = init_params<float>(c, 1);
  CHECK(full.find("main.head.weight") >= 0);
  CHECK(full.find("dense.in.weight") >= 0);
  c.dense = DenseMode::shared;
  CHECK(init_params<float>(c, 1).find("dense.in.weight") < 0);
  c.dense = DenseMode::off;
  const auto off = init_params<float>(c, 1);
  CHECK(off.layout.cross.empty());
  CHECK(off.scalar_count() < full.scalar_count());
  CHECK(init_params<float>(c, 1).values == init_params<float>(c, 1).values);
}

TEST_CASE("checkpoints round trip bitwise with their freeze mask") {
  test::TempDir dir("ckpt");
  ModelConfig c = small_config();
  c.sparse = SparseMode::cross;
  auto p = init_params<float>(c, 9);
  p.set_frozen(ParamGroup::main, true);
  save_checkpoint(dir / "ck.nvt", p);
  CHECK(std::filesystem::exists(checkpoint_manifest_path(dir / "ck.nvt")));
  const auto back = load_checkpoint(dir / "ck.nvt");
  CHECK(back.config == p.config);
  CHECK(back.frozen == p.frozen);
  REQUIRE(back.size() == p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(back.slots[i].name == p.slots[i].name);
    CHECK(back.values[i] == p.values[i]);
  }
  std::filesystem::remove(checkpoint_manifest_path(dir / "ck.nvt"));
  CHECK_THROWS_AS(load_checkpoint(dir / "ck.nvt"), Error);
}

}
