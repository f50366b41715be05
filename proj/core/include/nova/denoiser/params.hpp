#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nova/manifest.hpp"

namespace nova::denoiser {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ParamGroup : int { codec = 0, main = 1, sparse = 2, hint = 3, dense = 4, cross = 5 };
inline constexpr int kGroupCount = 6;
const char* to_string(ParamGroup g) noexcept;
ParamGroup parse_group(const std::string& name);

/// additive: S = Linear(sparse tokens); cross: S = CrossAttn(Q = main, K = V = sparse tokens).
enum class SparseMode { additive, cross };
/// independent: own trained weights; shared: reuses main weights without
/// receiving gradients; off: no dense branch at all.
enum class DenseMode { independent, shared, off };

const char* to_string(SparseMode m) noexcept;
const char* to_string(DenseMode m) noexcept;
SparseMode parse_sparse_mode(const std::string& s);
DenseMode parse_dense_mode(const std::string& s);

struct ModelConfig {
  int height = 16;
  int width = 16;
  int frames = 17;
  int channels = 3;
  int patch = 4;
  int patch_t = 1;
  int dim = 64;
  int layers = 4;
  int heads = 4;
  int mlp_ratio = 4;
  int schedule_steps = 100;
  SparseMode sparse = SparseMode::additive;
  DenseMode dense = DenseMode::independent;

  void validate() const;
  int patch_dim() const noexcept { return patch_t * patch * patch * channels; }
  /// Distinct clamped (dt, dr, dc) token offsets within one clip.
  int relative_offset_count() const noexcept {
    return (2 * (frames / patch_t) - 1) * (2 * (height / patch) - 1) * (2 * (width / patch) - 1);
  }

  /// Table column of a token offset; offsets beyond the clip are clamped.
  int relative_offset_index(int dt, int dr, int dc) const noexcept;

  void write(Manifest& m, const std::string& prefix = "model.") const;
  static ModelConfig read(const Manifest& m, const std::string& prefix = "model.");
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LinearIdx {
  int weight = -1;
  int bias = -1;
};
struct NormIdx {
  int gain = -1;
  int bias = -1;
};
struct AttnIdx {
  LinearIdx q, k, v, out;
};
struct BlockIdx {
  NormIdx norm1;
  AttnIdx attn;
  NormIdx norm2;
  LinearIdx fc1, fc2;
};
struct CrossIdx {
  NormIdx norm_q, norm_kv;
  AttnIdx attn;
  int pos = -1;  // heads x relative_offset_count
};
struct BranchIdx {
  LinearIdx in;
  std::vector<BlockIdx> blocks;
};

/// Positions of every tensor in the flat parameter list.
struct Layout {
  int codec_embed = -1;  // dim x patch_dim
  int codec_bias = -1;   // 1 x dim
  int timestep = -1;     // schedule_steps x dim
  BranchIdx main;
  NormIdx norm_out;
  LinearIdx head;
  BranchIdx sparse;
  std::vector<LinearIdx> hint_linear;  // SparseMode::additive
  std::vector<CrossIdx> hint_cross;    // SparseMode::cross
  BranchIdx dense;                     // DenseMode::independent
  std::vector<CrossIdx> cross;         // empty when dense is off
};

struct ParamSlot {
  std::string name;
  ParamGroup group;
};

/// All trainable tensors plus a per-group freeze mask. Biases and norm
/// parameters are 1 x n row matrices.
template <typename S>
struct DenoiserParams {
  ModelConfig config;
  Layout layout;
  std::vector<ParamSlot> slots;
  std::vector<Mat<S>> values;
  std::array<bool, kGroupCount> frozen{};

  std::size_t size() const noexcept { return values.size(); }
  std::size_t scalar_count() const noexcept;
  int find(const std::string& name) const noexcept;

  bool is_frozen(ParamGroup g) const noexcept { return frozen[static_cast<std::size_t>(g)]; }
  void set_frozen(ParamGroup g, bool f) noexcept { frozen[static_cast<std::size_t>(g)] = f; }
  bool trainable(std::size_t i) const noexcept { return !is_frozen(slots[i].group); }
  bool all_finite() const noexcept;

  Mat<S>& operator[](int i) { return values[static_cast<std::size_t>(i)]; }
  const Mat<S>& operator[](int i) const { return values[static_cast<std::size_t>(i)]; }

  template <typename T>
  DenoiserParams<T> cast() const {
    DenoiserParams<T> out;
    out.config = config;
    out.layout = layout;
    out.slots = slots;
    out.frozen = frozen;
    out.values.reserve(values.size());
    for (const auto& v : values) out.values.push_back(v.template cast<T>());
    return out;
  }
};

/// Gradient buffers shaped like the parameters.
template <typename S>
std::vector<Mat<S>> zero_grads(const DenoiserParams<S>& p) {
  std::vector<Mat<S>> g;
  g.reserve(p.values.size());
  for (const auto& v : p.values) g.push_back(Mat<S>::Zero(v.rows(), v.cols()));
  return g;
}

/// Builds the slot list for `config` with every tensor zero-filled.
template <typename S>
DenoiserParams<S> allocate_params(const ModelConfig& config);

/// Xavier-uniform weights, unit norm gains, zero biases, identity codec,
/// sinusoidal timestep table. Hint projections and cross-attention output
/// projections start at exactly zero. The codec group starts frozen.
template <typename S>
DenoiserParams<S> init_params(const ModelConfig& config, std::uint64_t seed);

/// Default freeze mask: codec frozen, everything else trainable.
inline std::array<bool, kGroupCount> default_freeze() { return {true, false, false, false, false, false}; }

}  // namespace nova::denoiser
