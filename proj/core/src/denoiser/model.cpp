#include "nova/denoiser/model.hpp"

#include <algorithm>
#include <cmath>

#include "nova/error.hpp"

namespace nova::denoiser {
namespace {

// Adds sinusoids of `pos` into columns [offset, offset + width).
void add_sinusoid(float* row, int offset, int width, int pos) {
  for (int j = 0; j + 1 < width; j += 2) {
    const double freq = std::pow(100.0, -static_cast<double>(j) / width);
    row[offset + j] = static_cast<float>(std::sin(pos * freq));
    row[offset + j + 1] = static_cast<float>(std::cos(pos * freq));
  }
}

template <typename S>
Mat<S> branch_input(const DenoiserParams<S>& p, const LinearIdx& in, const Mat<S>& tokens, const Mat<S>& pe, int t) {
  Mat<S> x = linear_forward(p, in, tokens);
  x += pe;
  x.rowwise() += p[p.layout.timestep].row(t);
  return x;
}

template <typename S>
void run_branch(const DenoiserParams<S>& p, const BranchIdx& idx, const Mat<S>& tokens, const Mat<S>& pe,
                BranchCache<S>& cache) {
  cache.input = branch_input(p, idx.in, tokens, pe, 0);
  const std::size_t L = idx.blocks.size();
  cache.blocks.resize(L);
  cache.outputs.resize(L);
  const Mat<S>* x = &cache.input;
  for (std::size_t l = 0; l < L; ++l) {
    cache.outputs[l] = block_forward(p, idx.blocks[l], *x, cache.blocks[l]);
    x = &cache.outputs[l];
  }
}

template <typename S>
void branch_backward(const DenoiserParams<S>& p, const BranchIdx& idx, const BranchCache<S>& cache,
                     const Mat<S>& tokens, const std::vector<Mat<S>>& d_out, const Grads<S>& g) {
  const int L = static_cast<int>(idx.blocks.size());
  Mat<S> d = d_out[static_cast<std::size_t>(L - 1)];
  for (int l = L - 1; l >= 0; --l) {
    const auto ul = static_cast<std::size_t>(l);
    d = block_backward(p, idx.blocks[ul], cache.blocks[ul], d, g);
    if (l > 0) d += d_out[ul - 1];
  }
  linear_backward(p, idx.in, tokens, d, g);
  if (Mat<S>* dt = g.at(p.layout.timestep)) dt->row(0) += d.colwise().sum();
}

bool dense_enabled(const ModelConfig& c, const ForwardOptions& o) { return o.dense && c.dense != DenseMode::off; }

}  // namespace

TokenGeometry geometry_for(const ModelConfig& c, int frames, int height, int width) {
  if (frames % c.patch_t != 0 || height % c.patch != 0 || width % c.patch != 0)
    fail(ErrorKind::precondition, "video " + std::to_string(frames) + "x" + std::to_string(height) + "x" +
                                      std::to_string(width) + " is not divisible by the patch size");
  TokenGeometry g;
  g.frames = frames / c.patch_t;
  g.rows = height / c.patch;
  g.cols = width / c.patch;
  g.patch = c.patch;
  g.patch_t = c.patch_t;
  g.channels = c.channels;
  return g;
}

template <typename S>
Mat<S> position_encoding(const TokenGeometry& g, int dim) {
  int ds = dim / 3;
  ds -= ds % 2;
  const int dt = dim - 2 * ds;
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> pe =
      Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(g.count(), dim);
  for (int t = 0; t < g.frames; ++t)
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) {
        float* row = pe.row((t * g.rows + r) * g.cols + c).data();
        add_sinusoid(row, 0, dt, t);
        add_sinusoid(row, dt, ds, r);
        add_sinusoid(row, dt + ds, ds, c);
      }
  return pe.template cast<S>();
}

template <typename S>
Mat<S> patchify(const Video& v, const TokenGeometry& g) {
  require(v.length() == g.video_frames() && v.height() == g.height() && v.width() == g.width() &&
              v.channels() == g.channels,
          "patchify: video does not match token geometry");
  Mat<S> out(g.count(), g.patch_dim());
  for (int t = 0; t < g.frames; ++t)
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) {
        S* dst = out.row((t * g.rows + r) * g.cols + c).data();
        int k = 0;
        for (int dt = 0; dt < g.patch_t; ++dt) {
          const Image& f = v.frame(t * g.patch_t + dt);
          for (int dy = 0; dy < g.patch; ++dy)
            for (int dx = 0; dx < g.patch; ++dx)
              for (int ch = 0; ch < g.channels; ++ch) dst[k++] = static_cast<S>(f.at(r * g.patch + dy, c * g.patch + dx, ch));
        }
      }
  return out;
}

template <typename S>
std::vector<Image> unpatchify(const Mat<S>& patches, const TokenGeometry& g) {
  require(patches.rows() == g.count() && patches.cols() == g.patch_dim(), "unpatchify: shape mismatch");
  std::vector<Image> frames;
  frames.reserve(static_cast<std::size_t>(g.video_frames()));
  for (int i = 0; i < g.video_frames(); ++i) frames.emplace_back(g.height(), g.width(), g.channels);
  for (int t = 0; t < g.frames; ++t)
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) {
        const S* src = patches.row((t * g.rows + r) * g.cols + c).data();
        int k = 0;
        for (int dt = 0; dt < g.patch_t; ++dt) {
          Image& f = frames[static_cast<std::size_t>(t * g.patch_t + dt)];
          for (int dy = 0; dy < g.patch; ++dy)
            for (int dx = 0; dx < g.patch; ++dx)
              for (int ch = 0; ch < g.channels; ++ch)
                f.at(r * g.patch + dy, c * g.patch + dx, ch) = static_cast<float>(src[k++]);
        }
      }
  return frames;
}

template <typename S>
TokenGrid<S> encode(const Video& v, const DenoiserParams<S>& p) {
  const ModelConfig& c = p.config;
  require(v.channels() == c.channels, "encode: channel count differs from the model");
  TokenGrid<S> grid;
  grid.geometry = geometry_for(c, v.length(), v.height(), v.width());
  const Mat<S> patches = patchify<S>(v, grid.geometry);
  grid.tokens.noalias() = S(2) * patches * p[p.layout.codec_embed].transpose();
  grid.tokens.rowwise() += p[p.layout.codec_bias].row(0);
  grid.tokens += position_encoding<S>(grid.geometry, c.dim);
  return grid;
}

template <typename S>
Mat<S> decode_patches(const TokenGrid<S>& grid, const DenoiserParams<S>& p) {
  Mat<S> z = grid.tokens - position_encoding<S>(grid.geometry, p.config.dim);
  z.rowwise() -= p[p.layout.codec_bias].row(0);
  Mat<S> patches = z * p[p.layout.codec_embed];
  patches *= S(0.5);
  return patches;
}

template <typename S>
Video decode(const TokenGrid<S>& grid, const DenoiserParams<S>& p) {
  const Mat<S> patches = decode_patches(grid, p);
  const Mat<S> clipped = patches.cwiseMax(S(0)).cwiseMin(S(1));
  return Video(unpatchify(clipped, grid.geometry));
}

std::shared_ptr<const OffsetIndex> relative_offsets(const ModelConfig& c, const TokenGeometry& g) {
  auto out = std::make_shared<OffsetIndex>(g.count(), g.count());
  for (int i = 0; i < g.count(); ++i) {
    const int ti = i / (g.rows * g.cols), ri = i / g.cols % g.rows, ci = i % g.cols;
    for (int j = 0; j < g.count(); ++j) {
      const int tj = j / (g.rows * g.cols), rj = j / g.cols % g.rows, cj = j % g.cols;
      (*out)(i, j) = c.relative_offset_index(tj - ti, rj - ri, cj - ci);
    }
  }
  return out;
}

template <typename S>
Conditioning<S> condition(const DenoiserParams<S>& p, const TokenGrid<S>& reference, const TokenGrid<S>& source,
                          const ForwardOptions& o) {
  const ModelConfig& c = p.config;
  Conditioning<S> cond;
  cond.geometry = reference.geometry;
  cond.sparse = o.sparse;
  cond.dense = dense_enabled(c, o);
  const Mat<S> pe = position_encoding<S>(cond.geometry, c.dim);
  if (cond.sparse) {
    require(reference.tokens.rows() == cond.geometry.count(), "condition: reference token count mismatch");
    cond.sparse_tokens = reference.tokens;
    run_branch(p, p.layout.sparse, reference.tokens, pe, cond.sparse_branch);
  }
  if (cond.dense) {
    require(source.tokens.rows() == cond.geometry.count(), "condition: source token count mismatch");
    const BranchIdx& idx = c.dense == DenseMode::shared ? p.layout.main : p.layout.dense;
    cond.dense_tokens = source.tokens;
    run_branch(p, idx, source.tokens, pe, cond.dense_branch);
  }
  if (cond.dense || (cond.sparse && c.sparse == SparseMode::cross)) cond.offsets = relative_offsets(c, cond.geometry);
  return cond;
}

template <typename S>
Mat<S> predict(const DenoiserParams<S>& p, const Mat<S>& zt, int t, const Conditioning<S>& cond, MainCache<S>* cache) {
  const ModelConfig& c = p.config;
  require(t >= 0 && t < c.schedule_steps, "predict: timestep out of range");
  require(zt.rows() == cond.geometry.count() && zt.cols() == c.dim, "predict: latent shape mismatch");
  MainCache<S> local;
  MainCache<S>& mc = cache ? *cache : local;
  const auto L = static_cast<std::size_t>(c.layers);
  mc.blocks.resize(L);
  mc.post_block.resize(L);
  mc.hint.resize(L);
  mc.cross.resize(L);
  mc.zt = zt;
  mc.input = branch_input(p, p.layout.main.in, zt, position_encoding<S>(cond.geometry, c.dim), t);
  Mat<S> z = mc.input;
  for (std::size_t l = 0; l < L; ++l) {
    z = block_forward(p, p.layout.main.blocks[l], z, mc.blocks[l]);
    if (!cond.sparse && !cond.dense) continue;
    mc.post_block[l] = z;
    if (cond.sparse) {
      const Mat<S>& s = cond.sparse_branch.outputs[l];
      if (c.sparse == SparseMode::additive)
        z += linear_forward(p, p.layout.hint_linear[l], s);
      else
        z += cross_forward(p, p.layout.hint_cross[l], mc.post_block[l], s, mc.hint[l], cond.offsets);
    }
    if (cond.dense) z += cross_forward(p, p.layout.cross[l], mc.post_block[l], cond.dense_branch.outputs[l], mc.cross[l],
                                    cond.offsets);
  }
  mc.normed = norm_forward(p, p.layout.norm_out, z, mc.norm_out);
  return linear_forward(p, p.layout.head, mc.normed);
}

template <typename S>
Mat<S> forward(const DenoiserParams<S>& p, const TokenGrid<S>& zt, int t, const TokenGrid<S>& reference,
               const TokenGrid<S>& source, const ForwardOptions& o) {
  const Conditioning<S> cond = condition(p, reference, source, o);
  return predict(p, zt.tokens, t, cond);
}

template <typename S>
void backward(const DenoiserParams<S>& p, const Conditioning<S>& cond, const MainCache<S>& mc, int t,
              const Mat<S>& d_out, std::vector<Mat<S>>& grads) {
  const ModelConfig& c = p.config;
  const Grads<S> g{&grads};
  const auto L = static_cast<std::size_t>(c.layers);
  std::vector<Mat<S>> d_sparse, d_dense;
  if (cond.sparse) d_sparse.assign(L, Mat<S>::Zero(mc.input.rows(), c.dim));
  if (cond.dense) d_dense.assign(L, Mat<S>::Zero(mc.input.rows(), c.dim));

  const Mat<S> d_normed = linear_backward(p, p.layout.head, mc.normed, d_out, g);
  Mat<S> dz = norm_backward(p, p.layout.norm_out, mc.norm_out, d_normed, g);
  for (std::size_t li = L; li-- > 0;) {
    Mat<S> d_post = dz;
    if (cond.sparse) {
      if (c.sparse == SparseMode::additive) {
        d_sparse[li] += linear_backward(p, p.layout.hint_linear[li], cond.sparse_branch.outputs[li], dz, g);
      } else {
        const AttnBackward<S> hb = cross_backward(p, p.layout.hint_cross[li], mc.hint[li], dz, g);
        d_post += hb.d_q_in;
        d_sparse[li] += hb.d_kv_in;
      }
    }
    if (cond.dense) {
      const AttnBackward<S> cb = cross_backward(p, p.layout.cross[li], mc.cross[li], dz, g);
      d_post += cb.d_q_in;
      d_dense[li] += cb.d_kv_in;
    }
    dz = block_backward(p, p.layout.main.blocks[li], mc.blocks[li], d_post, g);
  }
  // The main input projection sees z_t; only the parameter gradients matter here.
  if (Mat<S>* dw = g.at(p.layout.main.in.weight)) dw->noalias() += mc.zt.transpose() * dz;
  if (Mat<S>* db = g.at(p.layout.main.in.bias)) *db += dz.colwise().sum();
  if (Mat<S>* dt = g.at(p.layout.timestep)) dt->row(t) += dz.colwise().sum();

  const bool main_trainable = !p.is_frozen(ParamGroup::main);
  if (cond.sparse && (main_trainable || !p.is_frozen(ParamGroup::sparse)))
    branch_backward(p, p.layout.sparse, cond.sparse_branch, cond.sparse_tokens, d_sparse, g);
  if (cond.dense && c.dense == DenseMode::independent && (main_trainable || !p.is_frozen(ParamGroup::dense)))
    branch_backward(p, p.layout.dense, cond.dense_branch, cond.dense_tokens, d_dense, g);

  for (std::size_t i = 0; i < grads.size(); ++i)
    if (!p.trainable(i)) grads[i].setZero();
}

template <typename S>
Mat<S> add_noise(const Mat<S>& x0, const Mat<S>& noise, int t, const NoiseSchedule& schedule) {
  require(x0.rows() == noise.rows() && x0.cols() == noise.cols(), "add_noise: shape mismatch");
  const double ab = schedule.alpha_bar(t);
  return static_cast<S>(std::sqrt(ab)) * x0 + static_cast<S>(std::sqrt(1.0 - ab)) * noise;
}

template <typename S>
S denoising_loss(const Mat<S>& predicted, const Mat<S>& noise) {
  require(predicted.rows() == noise.rows() && predicted.cols() == noise.cols(), "loss: shape mismatch");
  require(predicted.size() > 0, "loss: empty tensors");
  return (predicted - noise).squaredNorm() / static_cast<S>(predicted.size());
}

template <typename S>
S diffusion_loss(const Mat<S>& x0, const Mat<S>& noise, int t, const NoiseSchedule& schedule,
                 const NoisePredictor<S>& predictor) {
  return denoising_loss(predictor(add_noise(x0, noise, t, schedule), t), noise);
}

template <typename S>
LossResult<S> loss(const TrainingSample& sample, const DenoiserParams<S>& p, const NoiseSchedule& schedule,
                   const ForwardOptions& o) {
  require(schedule.steps() == p.config.schedule_steps, "loss: schedule length differs from the model");
  const TokenGrid<S> x0 = encode(sample.target, p);
  const TokenGrid<S> ref = encode(sample.reference, p);
  const TokenGrid<S> src = encode(sample.pseudo_source, p);
  require(ref.geometry.count() == x0.geometry.count() && src.geometry.count() == x0.geometry.count(),
          "loss: target, reference and source must share a shape");
  const Mat<S> noise = sample.noise.template cast<S>();
  const Mat<S> zt = add_noise(x0.tokens, noise, sample.timestep, schedule);
  Conditioning<S> cond = condition(p, ref, src, o);
  MainCache<S> cache;
  const Mat<S> pred = predict(p, zt, sample.timestep, cond, &cache);
  LossResult<S> out;
  out.loss = denoising_loss(pred, noise);
  out.grads = zero_grads(p);
  const Mat<S> d_out = (pred - noise) * (S(2) / static_cast<S>(pred.size()));
  backward(p, cond, cache, sample.timestep, d_out, out.grads);
  return out;
}

#define NOVA_INSTANTIATE(S)                                                                                        \
  template Mat<S> position_encoding<S>(const TokenGeometry&, int);                                                 \
  template Mat<S> patchify<S>(const Video&, const TokenGeometry&);                                                 \
  template std::vector<Image> unpatchify<S>(const Mat<S>&, const TokenGeometry&);                                  \
  template TokenGrid<S> encode<S>(const Video&, const DenoiserParams<S>&);                                         \
  template Mat<S> decode_patches<S>(const TokenGrid<S>&, const DenoiserParams<S>&);                                \
  template Video decode<S>(const TokenGrid<S>&, const DenoiserParams<S>&);                                         \
  template Conditioning<S> condition<S>(const DenoiserParams<S>&, const TokenGrid<S>&, const TokenGrid<S>&,        \
                                        const ForwardOptions&);                                                    \
  template Mat<S> predict<S>(const DenoiserParams<S>&, const Mat<S>&, int, const Conditioning<S>&, MainCache<S>*); \
  template Mat<S> forward<S>(const DenoiserParams<S>&, const TokenGrid<S>&, int, const TokenGrid<S>&,              \
                             const TokenGrid<S>&, const ForwardOptions&);                                          \
  template void backward<S>(const DenoiserParams<S>&, const Conditioning<S>&, const MainCache<S>&, int,           \
                            const Mat<S>&, std::vector<Mat<S>>&);                                                  \
  template Mat<S> add_noise<S>(const Mat<S>&, const Mat<S>&, int, const NoiseSchedule&);                           \
  template S denoising_loss<S>(const Mat<S>&, const Mat<S>&);                                                      \
  template S diffusion_loss<S>(const Mat<S>&, const Mat<S>&, int, const NoiseSchedule&, const NoisePredictor<S>&); \
  template LossResult<S> loss<S>(const TrainingSample&, const DenoiserParams<S>&, const NoiseSchedule&,            \
                                 const ForwardOptions&);

NOVA_INSTANTIATE(float)
NOVA_INSTANTIATE(double)
#undef NOVA_INSTANTIATE

}  // namespace nova::denoiser
