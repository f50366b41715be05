#pragma once

// Forward/backward primitives on row-major token matrices (tokens x width).
// Backward functions accumulate parameter gradients into the supplied
// buffers (skipped when null) and return the gradient w.r.t. the input.

#include <cmath>
#include <memory>
#include <vector>

#include "nova/denoiser/params.hpp"
#include "nova/error.hpp"

namespace nova::denoiser {

template <typename S>
using Col = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
struct Grads {
  std::vector<Mat<S>>* buffers = nullptr;
  Mat<S>* at(int index) const { return buffers ? &(*buffers)[static_cast<std::size_t>(index)] : nullptr; }
};

template <typename S>
Mat<S> linear_forward(const DenoiserParams<S>& p, const LinearIdx& idx, const Mat<S>& x) {
  Mat<S> y = x * p[idx.weight];
  y.rowwise() += p[idx.bias].row(0);
  return y;
}

template <typename S>
Mat<S> linear_backward(const DenoiserParams<S>& p, const LinearIdx& idx, const Mat<S>& x, const Mat<S>& dy,
                       const Grads<S>& g) {
  if (Mat<S>* dw = g.at(idx.weight)) dw->noalias() += x.transpose() * dy;
  if (Mat<S>* db = g.at(idx.bias)) *db += dy.colwise().sum();
  return dy * p[idx.weight].transpose();
}

template <typename S>
struct NormCache {
  Mat<S> xhat;
  Col<S> rstd;
};

inline constexpr double kNormEps = 1e-5;

template <typename S>
Mat<S> norm_forward(const DenoiserParams<S>& p, const NormIdx& idx, const Mat<S>& x, NormCache<S>& cache) {
  const Eigen::Index d = x.cols();
  const Col<S> mean = x.rowwise().mean();
  Mat<S> xc = x.colwise() - mean;
  const Col<S> var = xc.array().square().rowwise().sum() / static_cast<S>(d);
  cache.rstd = (var.array() + static_cast<S>(kNormEps)).rsqrt();
  cache.xhat = xc.array().colwise() * cache.rstd.array();
  Mat<S> y = cache.xhat.array().rowwise() * p[idx.gain].row(0).array();
  y.rowwise() += p[idx.bias].row(0);
  return y;
}

template <typename S>
Mat<S> norm_backward(const DenoiserParams<S>& p, const NormIdx& idx, const NormCache<S>& cache, const Mat<S>& dy,
                     const Grads<S>& g) {
  if (Mat<S>* dg = g.at(idx.gain)) *dg += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  if (Mat<S>* db = g.at(idx.bias)) *db += dy.colwise().sum();
  const Mat<S> dxhat = dy.array().rowwise() * p[idx.gain].row(0).array();
  const S inv_d = S(1) / static_cast<S>(dy.cols());
  const Col<S> mean_d = dxhat.rowwise().sum() * inv_d;
  const Col<S> mean_dx = (dxhat.array() * cache.xhat.array()).rowwise().sum().matrix() * inv_d;
  Mat<S> dx = dxhat;
  dx.colwise() -= mean_d;
  dx -= (cache.xhat.array().colwise() * mean_dx.array()).matrix();
  return dx.array().colwise() * cache.rstd.array();
}

template <typename S>
Mat<S> gelu_forward(const Mat<S>& a) {
  const S k = static_cast<S>(0.7978845608028654);  // sqrt(2/pi)
  const S c = static_cast<S>(0.044715);
  return a.unaryExpr([=](S v) { return S(0.5) * v * (S(1) + std::tanh(k * (v + c * v * v * v))); });
}

template <typename S>
Mat<S> gelu_backward(const Mat<S>& a, const Mat<S>& dy) {
  const S k = static_cast<S>(0.7978845608028654);
  const S c = static_cast<S>(0.044715);
  const Mat<S> slope = a.unaryExpr([=](S v) {
    const S th = std::tanh(k * (v + c * v * v * v));
    return S(0.5) * (S(1) + th) + S(0.5) * v * (S(1) - th * th) * k * (S(1) + S(3) * c * v * v);
  });
  return dy.cwiseProduct(slope);
}

/// Column of the relative-position table for every (query, key) pair.
using OffsetIndex = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Learned per-head logit bias looked up by relative token offset.
struct PositionBias {
  int table = -1;  // heads x offset classes
  std::shared_ptr<const OffsetIndex> offsets;

  bool active() const noexcept { return table >= 0 && offsets != nullptr; }
};

template <typename S>
struct AttnCache {
  Mat<S> q_in, kv_in;
  Mat<S> q, k, v, o;
  std::vector<Mat<S>> probs;  // one (Nq x Nk) matrix per head
  PositionBias bias;
};

/// Multi-head attention with queries from q_in and keys/values from kv_in.
template <typename S>
Mat<S> attn_forward(const DenoiserParams<S>& p, const AttnIdx& idx, int heads, const Mat<S>& q_in, const Mat<S>& kv_in,
                    AttnCache<S>& cache, const PositionBias& bias = {}) {
  cache.q_in = q_in;
  cache.kv_in = kv_in;
  cache.bias = bias;
  if (bias.active())
    require(bias.offsets->rows() == q_in.rows() && bias.offsets->cols() == kv_in.rows(),
            "attention: offset index does not match the token counts");
  cache.q = linear_forward(p, idx.q, q_in);
  cache.k = linear_forward(p, idx.k, kv_in);
  cache.v = linear_forward(p, idx.v, kv_in);
  const Eigen::Index dh = cache.q.cols() / heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));
  cache.o.resize(q_in.rows(), cache.q.cols());
  cache.probs.resize(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Mat<S>& P = cache.probs[static_cast<std::size_t>(h)];
    P.noalias() = cache.q.middleCols(h * dh, dh) * cache.k.middleCols(h * dh, dh).transpose();
    P *= scale;
    if (bias.active()) {
      const auto row = p[bias.table].row(h);
      const OffsetIndex& off = *bias.offsets;
      for (Eigen::Index i = 0; i < P.rows(); ++i)
        for (Eigen::Index j = 0; j < P.cols(); ++j) P(i, j) += row(off(i, j));
    }
    const Col<S> row_max = P.rowwise().maxCoeff();
    P = (P.colwise() - row_max).array().exp();
    const Col<S> row_sum = P.rowwise().sum();
    P = P.array().colwise() / row_sum.array();
    cache.o.middleCols(h * dh, dh).noalias() = P * cache.v.middleCols(h * dh, dh);
  }
  return linear_forward(p, idx.out, cache.o);
}


template <typename S>
struct AttnBackward {
  Mat<S> d_q_in;
  Mat<S> d_kv_in;
};

template <typename S>
AttnBackward<S> attn_backward(const DenoiserParams<S>& p, const AttnIdx& idx, int heads, const AttnCache<S>& cache,
                              const Mat<S>& dy, const Grads<S>& g) {
  const Mat<S> d_o = linear_backward(p, idx.out, cache.o, dy, g);
  const Eigen::Index dh = cache.q.cols() / heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));
  Mat<S> dq(cache.q.rows(), cache.q.cols()), dk(cache.k.rows(), cache.k.cols()), dv(cache.v.rows(), cache.v.cols());
  for (int h = 0; h < heads; ++h) {
    const Mat<S>& P = cache.probs[static_cast<std::size_t>(h)];
    const auto d_oh = d_o.middleCols(h * dh, dh);
    Mat<S> dP = d_oh * cache.v.middleCols(h * dh, dh).transpose();
    dv.middleCols(h * dh, dh).noalias() = P.transpose() * d_oh;
    const Col<S> inner = (dP.array() * P.array()).rowwise().sum();
    Mat<S> dS = (P.array() * (dP.colwise() - inner).array()).matrix();
    if (Mat<S>* db = cache.bias.active() ? g.at(cache.bias.table) : nullptr) {
      const OffsetIndex& off = *cache.bias.offsets;
      for (Eigen::Index i = 0; i < dS.rows(); ++i)
        for (Eigen::Index j = 0; j < dS.cols(); ++j) (*db)(h, off(i, j)) += dS(i, j);
    }
    dS *= scale;
    dq.middleCols(h * dh, dh).noalias() = dS * cache.k.middleCols(h * dh, dh);
    dk.middleCols(h * dh, dh).noalias() = dS.transpose() * cache.q.middleCols(h * dh, dh);
  }
  AttnBackward<S> out;
  out.d_q_in = linear_backward(p, idx.q, cache.q_in, dq, g);
  out.d_kv_in = linear_backward(p, idx.k, cache.kv_in, dk, g);
  out.d_kv_in += linear_backward(p, idx.v, cache.kv_in, dv, g);
  return out;
}

template <typename S>
struct BlockCache {
  NormCache<S> norm1, norm2;
  AttnCache<S> attn;
  Mat<S> mlp_in, pre_act, act;
};

/// Pre-norm transformer block: h = x + Attn(LN(x)); y = h + MLP(LN(h)).
template <typename S>
Mat<S> block_forward(const DenoiserParams<S>& p, const BlockIdx& idx, const Mat<S>& x, BlockCache<S>& cache) {
  const int heads = p.config.heads;
  const Mat<S> a = norm_forward(p, idx.norm1, x, cache.norm1);
  Mat<S> h = x + attn_forward(p, idx.attn, heads, a, a, cache.attn);
  cache.mlp_in = norm_forward(p, idx.norm2, h, cache.norm2);
  cache.pre_act = linear_forward(p, idx.fc1, cache.mlp_in);
  cache.act = gelu_forward(cache.pre_act);
  h += linear_forward(p, idx.fc2, cache.act);
  return h;
}

template <typename S>
Mat<S> block_backward(const DenoiserParams<S>& p, const BlockIdx& idx, const BlockCache<S>& cache, const Mat<S>& dy,
                      const Grads<S>& g) {
  const int heads = p.config.heads;
  Mat<S> dh = dy;
  const Mat<S> d_act = linear_backward(p, idx.fc2, cache.act, dy, g);
  const Mat<S> d_pre = gelu_backward(cache.pre_act, d_act);
  const Mat<S> d_mlp_in = linear_backward(p, idx.fc1, cache.mlp_in, d_pre, g);
  dh += norm_backward(p, idx.norm2, cache.norm2, d_mlp_in, g);
  const AttnBackward<S> da = attn_backward(p, idx.attn, heads, cache.attn, dh, g);
  const Mat<S> d_a = da.d_q_in + da.d_kv_in;
  return dh + norm_backward(p, idx.norm1, cache.norm1, d_a, g);
}

template <typename S>
struct CrossCache {
  NormCache<S> norm_q, norm_kv;
  AttnCache<S> attn;
};

/// CrossAttn(Q = LN(query), K = V = LN(context)), plus the module's relative
/// position bias when `offsets` is given.
template <typename S>
Mat<S> cross_forward(const DenoiserParams<S>& p, const CrossIdx& idx, const Mat<S>& query, const Mat<S>& context,
                     CrossCache<S>& cache, std::shared_ptr<const OffsetIndex> offsets = nullptr) {
  const Mat<S> qn = norm_forward(p, idx.norm_q, query, cache.norm_q);
  const Mat<S> kvn = norm_forward(p, idx.norm_kv, context, cache.norm_kv);
  return attn_forward(p, idx.attn, p.config.heads, qn, kvn, cache.attn, PositionBias{idx.pos, std::move(offsets)});
}

template <typename S>
AttnBackward<S> cross_backward(const DenoiserParams<S>& p, const CrossIdx& idx, const CrossCache<S>& cache,
                               const Mat<S>& dy, const Grads<S>& g) {
  const AttnBackward<S> da = attn_backward(p, idx.attn, p.config.heads, cache.attn, dy, g);
  AttnBackward<S> out;
  out.d_q_in = norm_backward(p, idx.norm_q, cache.norm_q, da.d_q_in, g);
  out.d_kv_in = norm_backward(p, idx.norm_kv, cache.norm_kv, da.d_kv_in, g);
  return out;
}

}  // namespace nova::denoiser
