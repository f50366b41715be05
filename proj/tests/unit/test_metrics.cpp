#include <doctest.h>

#include <cmath>

#include "goldens.hpp"
#include "helpers.hpp"
#include "nova/error.hpp"
#include "nova/manifest.hpp"
#include "nova/metrics.hpp"

using namespace nova;
using namespace nova::metrics;

namespace {

Video add_noise(const Video& v, double sigma, std::uint64_t seed) {
  Rng r(seed);
  std::vector<Image> out;
  for (const auto& f : v.frames()) {
    Image g = f;
    for (auto& x : g.data()) x = std::clamp(static_cast<float>(x + sigma * r.normal()), 0.0f, 1.0f);
    out.push_back(g);
  }
  return Video(out);
}

MaskSequence square_masks(int frames, int h, int w, int y0, int x0, int size) {
  std::vector<Image> m;
  for (int t = 0; t < frames; ++t) {
    Image img(h, w, 1);
    for (int y = y0; y < y0 + size; ++y)
      for (int x = x0; x < x0 + size; ++x) img.at(y, x) = 1.0f;
    m.push_back(img);
  }
  return MaskSequence(m);
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("ssim of identical frames is exactly one") {
  Rng r(1);
  const Image a = test::random_image(r, 16, 16, 3);
  CHECK(ssim(a, a) == 1.0);
}

TEST_CASE("ssim of constant frames matches the closed form") {
  const double expected = (2 * 0.2 * 0.4 + kSsimC1) / (0.04 + 0.16 + kSsimC1);
  CHECK(std::abs(ssim(Image(16, 16, 1, 0.2f), Image(16, 16, 1, 0.4f)) - expected) < 1e-6);
  CHECK(std::abs(ssim(Image(12, 12, 3, 0.2f), Image(12, 12, 3, 0.4f)) - expected) < 1e-6);
}

TEST_CASE("ssim is symmetric, bounded and ranks an inverted frame lower") {
  Rng r(2);
  for (int i = 0; i < 10; ++i) {
    const Image a = test::random_image(r, 16, 16, 3), b = test::random_image(r, 16, 16, 3);
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
    CHECK(ssim(a, b) >= -1.0);
    CHECK(ssim(a, b) <= 1.0);
    Image inv = a;
    for (auto& v : inv.data()) v = 1.0f - v;
    CHECK(ssim(a, inv) < ssim(a, a));
  }
}

TEST_CASE("ssim rejects small or mismatched frames") {
  CHECK_THROWS_AS(ssim(Image(8, 8, 1), Image(8, 8, 1)), Error);
  CHECK_THROWS_AS(ssim(Image(16, 16, 1), Image(16, 17, 1)), Error);
}

TEST_CASE("bg-ssim is one for identical videos and undefined without background") {
  Rng r(3);
  const Video v = test::random_video(r, 3, 16, 16, 3);
  const auto masks = square_masks(3, 16, 16, 0, 0, 3);
  CHECK(bg_ssim(v, v, masks).mean == 1.0);
  CHECK_THROWS_AS(bg_ssim(v, v, square_masks(3, 16, 16, 0, 0, 16)), Error);
}

TEST_CASE("bg-ssim ignores any change inside the edited region") {
  Rng r(4);
  const Video src = test::random_video(r, 4, 16, 16, 3);
  const auto masks = square_masks(4, 16, 16, 1, 1, 4);
  std::vector<Image> frames;
  for (int t = 0; t < 4; ++t) {
    Image f = src[t];
    for (int y = 1; y < 5; ++y)
      for (int x = 1; x < 5; ++x)
        for (int c = 0; c < 3; ++c) f.at(y, x, c) = static_cast<float>(r.uniform());
    frames.push_back(f);
  }
  const auto s = bg_ssim(Video(frames), src, masks);
  CHECK(s.mean == 1.0);
  for (const auto& v : s.per_frame) CHECK(v.value() == 1.0);
}

TEST_CASE("window exclusion matches a brute-force oracle") {
  Rng r(5);
  const Image a = test::random_image(r, 16, 16, 1), b = test::random_image(r, 16, 16, 1);
  Image mask(16, 16, 1);
  mask.at(2, 3) = 1.0f;
  // Only windows whose 11x11 footprint misses (2, 3) remain: top-left y >= 3 or x >= 4.
  const auto g = [](int n) {
    std::vector<double> w(11);
    double s = 0;
    for (int i = 0; i < 11; ++i) s += (w[static_cast<std::size_t>(i)] = std::exp(-(i - 5) * (i - 5) / (2 * 2.25)));
    for (auto& x : w) x /= s;
    return w[static_cast<std::size_t>(n)];
  };
  double sum = 0;
  int count = 0;
  for (int y0 = 0; y0 + 11 <= 16; ++y0)
    for (int x0 = 0; x0 + 11 <= 16; ++x0) {
      if (y0 <= 2 && x0 <= 3) continue;
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double w = g(i) * g(j), va = a.at(y0 + i, x0 + j), vb = b.at(y0 + i, x0 + j);
          ma += w * va;
          mb += w * vb;
          saa += w * va * va;
          sbb += w * vb * vb;
          sab += w * va * vb;
        }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      sum += (2 * ma * mb + kSsimC1) * (2 * cov + kSsimC2) / ((ma * ma + mb * mb + kSsimC1) * (va + vb + kSsimC2));
      ++count;
    }
  CHECK(masked_ssim(a, b, mask).value() == doctest::Approx(sum / count).epsilon(1e-9));
}

TEST_CASE("psnr is capped for identical inputs and background psnr ignores the mask") {
  Rng r(6);
  const Video v = test::random_video(r, 2, 16, 16, 3);
  CHECK(psnr(v, v) == kPsnrCap);
  std::vector<Image> f = v.frames();
  f[0].at(0, 0, 0) = 1.0f - f[0].at(0, 0, 0);
  CHECK(psnr(Video(f), v) < kPsnrCap);
  CHECK(background_psnr(Video(f), v, square_masks(2, 16, 16, 0, 0, 1)) == kPsnrCap);
}

TEST_CASE("toy embeddings are unit norm and deterministic") {
  Rng r(7);
  const ToyEmbedder e;
  for (int c : {1, 3}) {
    const Image img = test::random_image(r, 16, 24, c);
    const auto v = e.embed(img);
    CHECK(v.size() == static_cast<std::size_t>(64 * c));
    double n = 0;
    for (double x : v) n += x * x;
    CHECK(std::abs(std::sqrt(n) - 1.0) < 1e-6);
    CHECK(v == e.embed(img));
  }
}

TEST_CASE("consistency scores are exactly one for repeated frames") {
  Rng r(8);
  const Image f = test::random_image(r, 16, 16, 3);
  const Video v({f, f, f});
  const ToyEmbedder e;
  CHECK(temporal_consistency(v, f, e).mean == 1.0);
  CHECK(frame_consistency(v, v, e).mean == 1.0);
}

TEST_CASE("a hard cut lowers temporal consistency") {
  Rng r(9);
  const Image a = test::random_image(r, 16, 16, 3), b = test::random_image(r, 16, 16, 3);
  const ToyEmbedder e;
  const double cut = temporal_consistency(Video({a, a, b, b}), a, e).mean;
  CHECK(cut < temporal_consistency(Video({a, a, a, a}), a, e).mean);
}

TEST_CASE("spatial shuffling lowers frame consistency") {
  Rng r(10);
  const Video src = test::golden_target();
  std::vector<Image> frames;
  for (const auto& f : src.frames()) {
    Image g(f.height(), f.width(), f.channels());
    for (int y = 0; y < f.height(); ++y)
      for (int x = 0; x < f.width(); ++x)
        for (int c = 0; c < 3; ++c) g.at(y, x, c) = f.at((y * 7 + 3) % 16, (x * 5 + 1) % 16, c);
    frames.push_back(g);
  }
  CHECK(frame_consistency(Video(frames), src, ToyEmbedder{}).mean < 1.0);
}

TEST_CASE("more noise strictly lowers ssim, tc and fc") {
  const Video src = test::golden_target();
  const ToyEmbedder e;
  double prev_ssim = 2, prev_tc = 2, prev_fc = 2;
  for (double sigma : {0.02, 0.05, 0.1, 0.2}) {
    const Video gen = add_noise(src, sigma, 1);
    double s = 0;
    for (int t = 0; t < src.length(); ++t) s += ssim(gen[t], src[t]);
    s /= src.length();
    const double tc = temporal_consistency(gen, src[0], e).mean;
    const double fc = frame_consistency(gen, src, e).mean;
    CHECK(s < prev_ssim);
    CHECK(tc < prev_tc);
    CHECK(fc < prev_fc);
    prev_ssim = s;
    prev_tc = tc;
    prev_fc = fc;
  }
}

TEST_CASE("reports fill every field and series match the video length") {
  const Video src = test::golden_target();
  const Video gen = add_noise(src, 0.05, 2);
  const auto masks = square_masks(src.length(), 16, 16, 2, 2, 3);
  const EvalInputs in{gen, src, &masks, nullptr, "test"};
  const auto rep = evaluate(in, ToyEmbedder{});
  CHECK(rep.frames == 17);
  CHECK(rep.tc.per_frame.size() == 17);
  CHECK(rep.fc.per_frame.size() == 17);
  CHECK(rep.bg_ssim.has_value());
  CHECK(rep.background_psnr.has_value());
  CHECK(rep.embedder == "toy8x8");
  CHECK(rep.tc_reference == "generated_first");
  CHECK(std::isfinite(rep.psnr));
}

TEST_CASE("fixture metrics match the frozen goldens") {
  const Manifest g = Manifest::read(std::filesystem::path(NOVA_FIXTURE_DIR) / test::kMetricGolden);
  const Video target = test::golden_target();
  const Video ref = test::golden_reference().video;
  const ToyEmbedder e;
  CHECK(std::abs(temporal_consistency(ref, target[0], e).mean - std::stod(g.require("tc"))) < 1e-6);
  CHECK(std::abs(frame_consistency(ref, target, e).mean - std::stod(g.require("fc"))) < 1e-6);
  CHECK(std::abs(ssim(ref[8], target[8]) - std::stod(g.require("ssim_frame8"))) < 1e-6);
  CHECK(std::abs(psnr(ref, target) - std::stod(g.require("psnr"))) < 1e-6);
}

}
