#pragma once

// Dual-branch denoiser. The main branch predicts noise from z_t; at every
// layer l it receives
//   z <- block_l(z);  z <- z + S_l + D_l
// where S_l is a zero-initialized projection of the sparse (reference)
// branch and D_l is a zero-initialized cross-attention readout of the dense
// (source) branch.

#include <functional>
#include <vector>

#include "nova/denoiser/layers.hpp"
#include "nova/denoiser/params.hpp"
#include "nova/denoiser/schedule.hpp"
#include "nova/video.hpp"

namespace nova::denoiser {

struct TokenGeometry {
  int frames = 0;  // temporal token count
  int rows = 0;
  int cols = 0;
  int patch = 1;
  int patch_t = 1;
  int channels = 3;

  int count() const noexcept { return frames * rows * cols; }
  int video_frames() const noexcept { return frames * patch_t; }
  int height() const noexcept { return rows * patch; }
  int width() const noexcept { return cols * patch; }
  int patch_dim() const noexcept { return patch_t * patch * patch * channels; }
};

/// Throws when the video dimensions are not divisible by the patch sizes.
TokenGeometry geometry_for(const ModelConfig& config, int frames, int height, int width);

template <typename S>
struct TokenGrid {
  TokenGeometry geometry;
  Mat<S> tokens;  // count x dim
};

/// Fixed sinusoidal encoding over (t, y, x); values are float-rounded.
template <typename S>
Mat<S> position_encoding(const TokenGeometry& g, int dim);

template <typename S>
Mat<S> patchify(const Video& v, const TokenGeometry& g);
template <typename S>
std::vector<Image> unpatchify(const Mat<S>& patches, const TokenGeometry& g);

/// tokens = 2 * patches * E^T + bias + PE
template <typename S>
TokenGrid<S> encode(const Video& v, const DenoiserParams<S>& params);
/// patches = (tokens - PE - bias) * E / 2, before clamping.
template <typename S>
Mat<S> decode_patches(const TokenGrid<S>& grid, const DenoiserParams<S>& params);
/// Decoded pixels clamped to [0, 1].
template <typename S>
Video decode(const TokenGrid<S>& grid, const DenoiserParams<S>& params);

struct ForwardOptions {
  bool sparse = true;
  bool dense = true;
};

template <typename S>
struct BranchCache {
  Mat<S> input;
  std::vector<BlockCache<S>> blocks;
  std::vector<Mat<S>> outputs;  // token state after each layer
};

/// Sparse and dense branch activations. They depend only on the reference
/// and source, so sampling computes them once per video.
template <typename S>
struct Conditioning {
  TokenGeometry geometry;
  bool sparse = false;
  bool dense = false;
  Mat<S> sparse_tokens;  // encoded reference
  Mat<S> dense_tokens;   // encoded source
  BranchCache<S> sparse_branch;
  BranchCache<S> dense_branch;
  std::shared_ptr<const OffsetIndex> offsets;  // token-pair offset classes for cross-attention
};

/// Offset class (ModelConfig::relative_offset_index) of every token pair.
std::shared_ptr<const OffsetIndex> relative_offsets(const ModelConfig& config, const TokenGeometry& g);

template <typename S>
Conditioning<S> condition(const DenoiserParams<S>& params, const TokenGrid<S>& reference, const TokenGrid<S>& source,
                          const ForwardOptions& options);

template <typename S>
struct MainCache {
  Mat<S> zt;
  Mat<S> input;
  std::vector<BlockCache<S>> blocks;
  std::vector<Mat<S>> post_block;
  std::vector<CrossCache<S>> hint;
  std::vector<CrossCache<S>> cross;
  NormCache<S> norm_out;
  Mat<S> normed;
};

/// Predicted noise for z_t at timestep t. Fills `cache` for backward when given.
template <typename S>
Mat<S> predict(const DenoiserParams<S>& params, const Mat<S>& zt, int t, const Conditioning<S>& cond,
               MainCache<S>* cache = nullptr);

/// condition() followed by predict().
template <typename S>
Mat<S> forward(const DenoiserParams<S>& params, const TokenGrid<S>& zt, int t, const TokenGrid<S>& reference,
               const TokenGrid<S>& source, const ForwardOptions& options = {});

/// Accumulates gradients of sum(d_out * prediction) into `grads`, then zeroes
/// the slots of frozen groups.
template <typename S>
void backward(const DenoiserParams<S>& params, const Conditioning<S>& cond, const MainCache<S>& cache, int t,
              const Mat<S>& d_out, std::vector<Mat<S>>& grads);

/// z_t = sqrt(abar_t) * x0 + sqrt(1 - abar_t) * noise
template <typename S>
Mat<S> add_noise(const Mat<S>& x0, const Mat<S>& noise, int t, const NoiseSchedule& schedule);

/// Mean squared error between predicted and true noise.
template <typename S>
S denoising_loss(const Mat<S>& predicted, const Mat<S>& noise);

template <typename S>
using NoisePredictor = std::function<Mat<S>(const Mat<S>& zt, int t)>;

/// Noises x0 at timestep t and scores `predictor` against the injected noise.
template <typename S>
S diffusion_loss(const Mat<S>& x0, const Mat<S>& noise, int t, const NoiseSchedule& schedule,
                 const NoisePredictor<S>& predictor);

/// Target, pseudo-source and degraded reference of one clip plus the
/// diffusion draw.
struct TrainingSample {
  Video target;
  Video pseudo_source;
  Video reference;
  int timestep = 0;
  Mat<float> noise;  // tokens x dim, standard normal
  Manifest log;      // how the sample was drawn
};

template <typename S>
struct LossResult {
  S loss = 0;
  std::vector<Mat<S>> grads;
};

/// Loss and gradients for all non-frozen parameters (frozen slots are zero).
template <typename S>
LossResult<S> loss(const TrainingSample& sample, const DenoiserParams<S>& params, const NoiseSchedule& schedule,
                   const ForwardOptions& options = {});

}  // namespace nova::denoiser
