#include <benchmark/benchmark.h>

#include "nova/denoiser/model.hpp"
#include "nova/denoiser/sample.hpp"
#include "nova/denoiser/train.hpp"
#include "nova/moving_shapes.hpp"

namespace {

using namespace nova;
using namespace nova::denoiser;

struct Setup {
  ModelConfig config;
  DenoiserParams<float> params;
  NoiseSchedule schedule;
  TrainingSample sample;

  Setup()
      : params(init_params<float>(config, 1)),
        schedule(NoiseSchedule::cosine(config.schedule_steps)) {
    const std::vector<Video> clips = shapes::generate_dataset(shapes::ClipSpec{}, 4, 1);
    sample = make_training_sample(clips, config, TrainConfig{}, 0, 0);
  }
};

const Setup& setup() {
  static const Setup s;
  return s;
}

void BM_Predict(benchmark::State& state) {
  const Setup& s = setup();
  const ForwardOptions o{true, state.range(0) != 0};
  const Conditioning<float> cond =
      condition(s.params, encode(s.sample.reference, s.params), encode(s.sample.pseudo_source, s.params), o);
  for (auto _ : state) benchmark::DoNotOptimize(predict(s.params, s.sample.noise, 50, cond));
}
BENCHMARK(BM_Predict)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_LossAndGrad(benchmark::State& state) {
  const Setup& s = setup();
  for (auto _ : state) benchmark::DoNotOptimize(loss(s.sample, s.params, s.schedule));
}
BENCHMARK(BM_LossAndGrad)->Unit(benchmark::kMillisecond);

void BM_Sample(benchmark::State& state) {
  const Setup& s = setup();
  SampleConfig cfg;
  cfg.steps = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(sample(s.sample.reference, s.sample.pseudo_source, s.params, s.schedule, cfg));
}
BENCHMARK(BM_Sample)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace
