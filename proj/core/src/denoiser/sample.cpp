#include "nova/denoiser/sample.hpp"

#include <cmath>

#include "nova/error.hpp"
#include "nova/rng.hpp"

namespace nova::denoiser {
namespace {

using MatF = Mat<float>;

Video slice(const Video& v, int start, int length) {
  return Video(std::vector<Image>(v.frames().begin() + start, v.frames().begin() + start + length));
}

MatF normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng rng) {
  MatF m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.normal());
  return m;
}

// Re-encodes the clamped pixel reading of x0 so every estimate is a valid video latent.
void project(TokenGrid<float>& x0, const DenoiserParams<float>& params, const MatF& pe) {
  const MatF patches = decode_patches(x0, params).cwiseMax(0.0f).cwiseMin(1.0f);
  x0.tokens.noalias() = 2.0f * patches * params[params.layout.codec_embed].transpose();
  x0.tokens.rowwise() += params[params.layout.codec_bias].row(0);
  x0.tokens += pe;
}

Video sample_window(const Video& reference, const Video& source, const DenoiserParams<float>& params,
                    const NoiseSchedule& schedule, const SampleConfig& cfg, Rng rng) {
  const TokenGrid<float> ref = encode(reference, params);
  const TokenGrid<float> src = encode(source, params);
  const Conditioning<float> cond = condition(params, ref, src, cfg.options);
  const MatF pe = position_encoding<float>(ref.geometry, params.config.dim);

  TokenGrid<float> z{ref.geometry, normal_matrix(ref.tokens.rows(), ref.tokens.cols(), rng.fork(0))};
  const std::vector<int> ts = schedule.sampling_steps(cfg.steps);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const int t = ts[i];
    const double ab = schedule.alpha_bar(t);
    const double ab_prev = i + 1 < ts.size() ? schedule.alpha_bar(ts[i + 1]) : 1.0;
    const MatF eps = predict(params, z.tokens, t, cond);
    TokenGrid<float> x0{z.geometry, (z.tokens - static_cast<float>(std::sqrt(1.0 - ab)) * eps) /
                                        static_cast<float>(std::sqrt(ab))};
    if (cfg.clip_x0) project(x0, params, pe);
    if (i + 1 == ts.size()) {
      z = std::move(x0);
      break;
    }
    // Posterior q(z_prev | z_t, x0) over the strided step.
    const double alpha = ab / ab_prev;
    const double beta = 1.0 - alpha;
    const double c0 = std::sqrt(ab_prev) * beta / (1.0 - ab);
    const double ct = std::sqrt(alpha) * (1.0 - ab_prev) / (1.0 - ab);
    const double var = beta * (1.0 - ab_prev) / (1.0 - ab);
    z.tokens = static_cast<float>(c0) * x0.tokens + static_cast<float>(ct) * z.tokens +
               static_cast<float>(std::sqrt(var)) * normal_matrix(z.tokens.rows(), z.tokens.cols(), rng.fork(i + 1));
    if (!z.tokens.allFinite()) fail(ErrorKind::numeric, "sampling diverged at timestep " + std::to_string(t));
  }
  if (!z.tokens.allFinite()) fail(ErrorKind::numeric, "sampling produced non-finite latents");
  return decode(z, params);
}

}  // namespace

std::vector<int> window_starts(int length, int window) {
  require(window >= 2 && length >= window, "window_starts: video shorter than the window");
  std::vector<int> starts;
  for (int s = 0;; s += window - 1) {
    if (s + window >= length) {
      starts.push_back(length - window);
      break;
    }
    starts.push_back(s);
  }
  return starts;
}

Video sample(const Video& reference, const Video& source, const DenoiserParams<float>& params,
             const NoiseSchedule& schedule, const SampleConfig& cfg) {
  require(reference.same_shape(source), "sample: reference and source must share a shape");
  require(schedule.steps() == params.config.schedule_steps, "sample: schedule length differs from the model");
  if (!params.all_finite()) fail(ErrorKind::numeric, "sample: parameters contain non-finite values");
  const int window = params.config.frames;
  if (reference.length() < window)
    fail(ErrorKind::precondition, "sample: video has " + std::to_string(reference.length()) +
                                      " frames, the model needs at least " + std::to_string(window));
  const Rng root = Rng(cfg.seed).fork(Stage::sample_noise);
  if (reference.length() == window) return sample_window(reference, source, params, schedule, cfg, root.fork(0));

  const int n = reference.length();
  std::vector<Image> sum;
  std::vector<int> count(static_cast<std::size_t>(n), 0);
  for (int f = 0; f < n; ++f) sum.emplace_back(reference.height(), reference.width(), reference.channels());
  const std::vector<int> starts = window_starts(n, window);
  for (std::size_t w = 0; w < starts.size(); ++w) {
    const int s = starts[w];
    const Video out = sample_window(slice(reference, s, window), slice(source, s, window), params, schedule, cfg,
                                    root.fork(w));
    for (int f = 0; f < window; ++f) {
      auto dst = sum[static_cast<std::size_t>(s + f)].data();
      const auto src = out[f].data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
      ++count[static_cast<std::size_t>(s + f)];
    }
  }
  for (int f = 0; f < n; ++f) {
    const float inv = 1.0f / static_cast<float>(count[static_cast<std::size_t>(f)]);
    for (float& v : sum[static_cast<std::size_t>(f)].data()) v *= inv;
    sum[static_cast<std::size_t>(f)].clamp01();
  }
  return Video(std::move(sum));
}

}  // namespace nova::denoiser
