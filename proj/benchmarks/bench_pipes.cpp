#include <benchmark/benchmark.h>

#include "nova/anchor.hpp"
#include "nova/fidelity.hpp"
#include "nova/moving_shapes.hpp"

namespace {

using namespace nova;

Video shapes_clip(int frames, int size) {
  shapes::ClipSpec spec;
  spec.frames = frames;
  spec.height = size;
  spec.width = size;
  return shapes::generate_clip(spec, Rng(3)).video;
}

void BM_Interpolate(benchmark::State& state) {
  const int frames = static_cast<int>(state.range(0));
  const Video v = shapes_clip(frames, static_cast<int>(state.range(1)));
  std::map<int, Image> keys;
  for (int t = 0; t < frames; t += 8) keys[t] = v[t];
  keys[frames - 1] = v[frames - 1];
  for (auto _ : state) benchmark::DoNotOptimize(anchor::interpolate_reference(keys, frames - 1));
  state.SetItemsProcessed(state.iterations() * frames);
}
BENCHMARK(BM_Interpolate)->Args({17, 16})->Args({81, 64})->Unit(benchmark::kMicrosecond);

void BM_Composite(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const Video v = shapes_clip(2, size);
  Image mask(size, size, 1);
  for (int i = 0; i < size * size; i += 3) mask.data()[static_cast<std::size_t>(i)] = 1.0f;
  for (auto _ : state) benchmark::DoNotOptimize(fidelity::composite(v[0], v[1], mask));
}
BENCHMARK(BM_Composite)->Arg(16)->Arg(64)->Arg(256);

void BM_PseudoSource(benchmark::State& state) {
  const Video target = shapes_clip(17, 16);
  const std::vector<Video> pool = {shapes_clip(17, 16), shapes_clip(9, 24)};
  fidelity::FidelityConfig cfg;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    cfg.seed = ++seed;
    benchmark::DoNotOptimize(fidelity::synth_pseudo_source(target, pool, cfg));
  }
}
BENCHMARK(BM_PseudoSource)->Unit(benchmark::kMicrosecond);

void BM_DegradedReference(benchmark::State& state) {
  const Video target = shapes_clip(17, 16);
  const anchor::DegradationConfig cfg;
  std::uint64_t seed = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(anchor::build_degraded_reference(target, cfg, anchor::KeyframeMode::random(2), Rng(++seed)));
}
BENCHMARK(BM_DegradedReference)->Unit(benchmark::kMicrosecond);

}  // namespace
