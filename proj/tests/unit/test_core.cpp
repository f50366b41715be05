#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "nova/error.hpp"
#include "nova/image_ops.hpp"
#include "nova/manifest.hpp"
#include "nova/nvt.hpp"
#include "nova/parallel.hpp"
#include "nova/rng.hpp"
#include "nova/video_io.hpp"

using namespace nova;
using test::TempDir;

TEST_SUITE("core") {

TEST_CASE("philox matches the published known-answer vectors") {
  using B = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("rng draws are a pure function of seed, stream and counter") {
  Rng a(42, 7, 3), b(42, 7, 3);
  CHECK(a.uniform() == b.uniform());
  CHECK(a.next_u64() == b.next_u64());
  CHECK(Rng(42).fork(Stage::anchor_degrade, 4).uniform() == Rng(42).fork(Stage::anchor_degrade, 4).uniform());
  CHECK(Rng(42).fork(Stage::anchor_degrade, 4).uniform() != Rng(42).fork(Stage::anchor_degrade, 5).uniform());
  CHECK(Rng(1).uniform() != Rng(2).uniform());
}

TEST_CASE("uniform on a degenerate interval returns the endpoint") {
  Rng r(0);
  CHECK(r.uniform(0.3, 0.3) == 0.3);
  CHECK_THROWS_AS(r.uniform(0.4, 0.3), Error);
}

TEST_CASE("uniform mean over 1e5 draws is within 0.01 of 0.5") {
  Rng r(123);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / 1e5 - 0.5) < 0.01);
}

TEST_CASE("normal draws have unit variance") {
  Rng r(9);
  double s = 0, s2 = 0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 0.03);
  CHECK(std::abs(s2 / n - 1.0) < 0.04);
}

TEST_CASE("below stays in range and covers it") {
  Rng r(5);
  std::array<int, 7> hits{};
  for (int i = 0; i < 7000; ++i) ++hits[r.below(7)];
  for (int h : hits) CHECK(h > 800);
}

TEST_CASE("video constructor enforces its invariants") {
  CHECK_THROWS_AS(Video(std::vector<Image>{}), Error);
  CHECK_THROWS_AS(Video({Image(2, 2, 3)}), Error);
  CHECK_THROWS_AS(Video({Image(2, 2, 3), Image(2, 3, 3)}), Error);
  CHECK_THROWS_AS(Video({Image(2, 2, 2), Image(2, 2, 2)}), Error);
  CHECK_THROWS_AS(Video({Image(2, 2, 1, 1.5f), Image(2, 2, 1)}), Error);
  CHECK_THROWS_AS(Video({Image(2, 2, 1, NAN), Image(2, 2, 1)}), Error);
  const Video v({Image(2, 3, 1), Image(2, 3, 1, 1.0f)});
  CHECK(v.last_index() == 1);
  CHECK(v.height() == 2);
  CHECK(v.width() == 3);
}

TEST_CASE("mask sequences detect binary content") {
  CHECK(MaskSequence({Image(2, 2, 1, 1.0f), Image(2, 2, 1)}).binary());
  CHECK_FALSE(MaskSequence({Image(2, 2, 1, 0.5f), Image(2, 2, 1)}).binary());
  CHECK_THROWS_AS(MaskSequence({Image(2, 2, 3)}), Error);
}

TEST_CASE("keyframe sets always start at 0 and end at T") {
  CHECK_THROWS_AS(KeyframeSet({3, 10}, 10), Error);
  CHECK_THROWS_AS(KeyframeSet({0, 5}, 10), Error);
  CHECK_THROWS_AS(KeyframeSet({0, 5, 5, 10}, 10), Error);
  const KeyframeSet k = KeyframeSet::fixed_interval(80, 10);
  CHECK(k.size() == 9);
  CHECK(k.segments() == 8);
  CHECK(k.indices().back() == 80);
  CHECK(KeyframeSet::fixed_interval(10, 4).indices() == std::vector<int>{0, 4, 8, 10});
}

TEST_CASE("container round trip is bit exact") {
  TempDir dir("nvt");
  Rng r(3);
  const Video v = test::random_video(r, 4, 5, 7, 3);
  save_video(v, dir / "v.nvt", VideoFormat::container);
  CHECK(load_video(dir / "v.nvt") == v);

  const MaskSequence m({test::random_binary(r, 5, 7), test::random_binary(r, 5, 7)});
  save_masks(m, dir / "m.nvt", VideoFormat::container);
  CHECK(load_masks(dir / "m.nvt") == m);

  const TensorBlob blob("w", {2, 3}, {1, -2, 3.5f, 1e-30f, -0.0f, 7});
  write_nvt(dir / "b.nvt", {blob, blob});
  const auto back = read_nvt(dir / "b.nvt");
  REQUIRE(back.size() == 2);
  CHECK(back[0].shape == blob.shape);
  CHECK(std::memcmp(back[0].data.data(), blob.data.data(), blob.data.size() * sizeof(float)) == 0);
}

TEST_CASE("nvt layout is little-endian with a fixed header") {
  std::ostringstream out;
  write_nvt_record(out, TensorBlob("x", {2}, {1.0f, -2.0f}));
  const std::string s = out.str();
  REQUIRE(s.size() == 4 + 4 + 8 + 8);
  CHECK(s.substr(0, 4) == "NVT1");
  CHECK(static_cast<unsigned char>(s[4]) == 1);
  CHECK(static_cast<unsigned char>(s[8]) == 2);
  CHECK(static_cast<unsigned char>(s[19]) == 0x3f);  // 1.0f = 0x3f800000
}

TEST_CASE("corrupt or truncated containers are data errors") {
  TempDir dir("nvtbad");
  std::ofstream(dir / "bad.nvt") << "NVT2garbage";
  CHECK_THROWS_AS(read_nvt(dir / "bad.nvt"), Error);
  std::ostringstream out;
  write_nvt_record(out, TensorBlob("x", {4}, {1, 2, 3, 4}));
  std::ofstream(dir / "short.nvt", std::ios::binary) << out.str().substr(0, 20);
  CHECK_THROWS_AS(read_nvt(dir / "short.nvt"), Error);
  CHECK_THROWS_AS(load_video(dir / "missing.nvt"), Error);
}

TEST_CASE("png frame round trip stays within 8-bit quantization") {
  TempDir dir("png");
  Rng r(4);
  const Video v = test::random_video(r, 3, 6, 5, 3);
  save_video(v, dir / "frames", VideoFormat::frames);
  const Video back = load_video(dir / "frames");
  CHECK(back.same_shape(v));
  CHECK(test::max_abs_diff(v, back) <= 1.0 / 255.0 + 1e-6);

  const Video gray = test::random_video(r, 2, 4, 4, 1);
  save_video(gray, dir / "gray", VideoFormat::frames);
  CHECK(load_video(dir / "gray").channels() == 1);
}

TEST_CASE("saving an empty video is a precondition error") {
  TempDir dir("empty");
  CHECK_THROWS_AS(save_video(Video(), dir / "x.nvt", VideoFormat::container), Error);
}

TEST_CASE("frame directories with mixed sizes are rejected") {
  TempDir dir("mixed");
  std::filesystem::create_directories(dir / "v");
  save_png(Image(4, 4, 3, 0.5f), dir / "v/00000.png");
  save_png(Image(4, 5, 3, 0.5f), dir / "v/00001.png");
  CHECK_THROWS_AS(load_video(dir / "v"), Error);
}

TEST_CASE("an 81-frame 832x480 directory loads as T=80, H=480, W=832") {
  TempDir dir("hd");
  std::filesystem::create_directories(dir / "v");
  Image frame(480, 832, 3, 0.25f);
  for (int t = 0; t < 81; ++t) {
    char name[16];
    std::snprintf(name, sizeof name, "%05d.png", t);
    frame.at(t, t, 0) = 1.0f;
    save_png(frame, dir / "v" / name);
  }
  const Video v = load_video(dir / "v");
  CHECK(v.last_index() == 80);
  CHECK(v.height() == 480);
  CHECK(v.width() == 832);
  CHECK(v[80].at(80, 80, 0) == 1.0f);
  CHECK(v[0].at(80, 80, 0) != 1.0f);
}

TEST_CASE("manifest round trips through text") {
  Manifest m;
  m.set("a", 0.1);
  m.set("b", std::int64_t{-3});
  m.set("c", std::string("x=y z"));
  m.set("d", true);
  const Manifest back = Manifest::parse(m.to_string());
  CHECK(back == m);
  CHECK(std::stod(back.require("a")) == 0.1);
  CHECK_THROWS_AS(back.require("missing"), Error);
}

TEST_CASE("error kinds map to exit codes") {
  CHECK(exit_code(ErrorKind::config) == 2);
  CHECK(exit_code(ErrorKind::data) == 3);
  CHECK(exit_code(ErrorKind::numeric) == 4);
}

TEST_CASE("identity warp leaves frames unchanged") {
  Rng r(8);
  const Image img = test::random_image(r, 9, 11, 3);
  CHECK(test::max_abs_diff(warp_affine(img, Affine2::identity()), img) <= 1e-6);
}

TEST_CASE("gaussian kernel is normalized and symmetric") {
  for (double sigma : {0.1, 0.5, 2.0}) {
    const auto k = gaussian_kernel(sigma);
    double sum = 0;
    for (double v : k) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < k.size(); ++i) CHECK(k[i] == doctest::Approx(k[k.size() - 1 - i]));
  }
}

TEST_CASE("hsv conversion round trips") {
  Rng r(2);
  for (int i = 0; i < 200; ++i) {
    const double R = r.uniform(), G = r.uniform(), B = r.uniform();
    const auto back = hsv_to_rgb(rgb_to_hsv(R, G, B));
    CHECK(back[0] == doctest::Approx(R).epsilon(1e-9));
    CHECK(back[1] == doctest::Approx(G).epsilon(1e-9));
    CHECK(back[2] == doctest::Approx(B).epsilon(1e-9));
  }
  CHECK(hue_difference(350, 10) == doctest::Approx(-20));
  CHECK(hue_difference(10, 350) == doctest::Approx(20));
}

TEST_CASE("parallel_for results do not depend on worker count") {
  std::vector<double> a(100), b(100);
  parallel_for(a.size(), 1, [&](std::size_t i) { a[i] = Rng(1).fork(Stage::fixture, i).uniform(); });
  parallel_for(b.size(), 4, [&](std::size_t i) { b[i] = Rng(1).fork(Stage::fixture, i).uniform(); });
  CHECK(a == b);
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) { require(i != 7, "seven"); }), Error);
}

}
