#include <benchmark/benchmark.h>

#include "nova/metrics.hpp"
#include "nova/moving_shapes.hpp"

namespace {

using namespace nova;

void BM_Ssim(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  shapes::ClipSpec spec;
  spec.frames = 2;
  spec.height = size;
  spec.width = size;
  const Video v = shapes::generate_clip(spec, Rng(5)).video;
  for (auto _ : state) benchmark::DoNotOptimize(metrics::ssim(v[0], v[1]));
}
BENCHMARK(BM_Ssim)->Arg(16)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_BackgroundSsim(benchmark::State& state) {
  shapes::ClipSpec spec;
  spec.frames = 17;
  spec.height = 64;
  spec.width = 64;
  const Video a = shapes::generate_clip(spec, Rng(5)).video;
  const Video b = shapes::generate_clip(spec, Rng(6)).video;
  std::vector<Image> masks;
  for (int t = 0; t < a.length(); ++t) {
    Image m(64, 64, 1);
    for (int y = 20; y < 40; ++y)
      for (int x = 20; x < 40; ++x) m.at(y, x, 0) = 1.0f;
    masks.push_back(std::move(m));
  }
  const MaskSequence mask(std::move(masks));
  for (auto _ : state) benchmark::DoNotOptimize(metrics::bg_ssim(a, b, mask));
}
BENCHMARK(BM_BackgroundSsim)->Unit(benchmark::kMillisecond);

}  // namespace
