#include "nova/denoiser/params.hpp"

#include <algorithm>
#include <cmath>

#include "nova/error.hpp"
#include "nova/rng.hpp"

namespace nova::denoiser {
namespace {

// Logit penalty per unit of L1 token distance in the initial cross-attention bias.
constexpr double kLocality = 2.0;
// Gain on the block output projections (attention out, fc2) relative to Xavier.
constexpr double kResidualGain = 0.1;

template <typename S>
struct Builder {
  DenoiserParams<S>& p;

  int add(const std::string& name, ParamGroup group, int rows, int cols) {
    p.slots.push_back({name, group});
    p.values.push_back(Mat<S>::Zero(rows, cols));
    return static_cast<int>(p.values.size()) - 1;
  }
  LinearIdx linear(const std::string& name, ParamGroup g, int in, int out) {
    return {add(name + ".weight", g, in, out), add(name + ".bias", g, 1, out)};
  }
  NormIdx norm(const std::string& name, ParamGroup g, int dim) {
    return {add(name + ".gain", g, 1, dim), add(name + ".bias", g, 1, dim)};
  }
  AttnIdx attn(const std::string& name, ParamGroup g, int dim) {
    return {linear(name + ".q", g, dim, dim), linear(name + ".k", g, dim, dim), linear(name + ".v", g, dim, dim),
            linear(name + ".out", g, dim, dim)};
  }
  BlockIdx block(const std::string& name, ParamGroup g, int dim, int hidden) {
    BlockIdx b;
    b.norm1 = norm(name + ".norm1", g, dim);
    b.attn = attn(name + ".attn", g, dim);
    b.norm2 = norm(name + ".norm2", g, dim);
    b.fc1 = linear(name + ".fc1", g, dim, hidden);
    b.fc2 = linear(name + ".fc2", g, hidden, dim);
    return b;
  }
  CrossIdx cross(const std::string& name, ParamGroup g, const ModelConfig& c) {
    return {norm(name + ".norm_q", g, c.dim), norm(name + ".norm_kv", g, c.dim), attn(name + ".attn", g, c.dim),
            add(name + ".attn.pos", g, c.heads, c.relative_offset_count())};
  }
  BranchIdx branch(const std::string& name, ParamGroup g, const ModelConfig& c) {
    BranchIdx b;
    b.in = linear(name + ".in", g, c.dim, c.dim);
    for (int l = 0; l < c.layers; ++l) b.blocks.push_back(block(name + ".block" + std::to_string(l), g, c.dim, c.dim * c.mlp_ratio));
    return b;
  }
};

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

const char* to_string(ParamGroup g) noexcept {
  switch (g) {
    case ParamGroup::codec: return "codec";
    case ParamGroup::main: return "main";
    case ParamGroup::sparse: return "sparse";
    case ParamGroup::hint: return "hint";
    case ParamGroup::dense: return "dense";
    case ParamGroup::cross: return "cross";
  }
  return "unknown";
}

ParamGroup parse_group(const std::string& name) {
  for (int i = 0; i < kGroupCount; ++i)
    if (name == to_string(static_cast<ParamGroup>(i))) return static_cast<ParamGroup>(i);
  fail(ErrorKind::config, "unknown parameter group '" + name + "'");
}

const char* to_string(SparseMode m) noexcept { return m == SparseMode::additive ? "additive" : "cross"; }

const char* to_string(DenseMode m) noexcept {
  switch (m) {
    case DenseMode::independent: return "independent";
    case DenseMode::shared: return "shared";
    case DenseMode::off: return "off";
  }
  return "unknown";
}

SparseMode parse_sparse_mode(const std::string& s) {
  if (s == "additive") return SparseMode::additive;
  if (s == "cross") return SparseMode::cross;
  fail(ErrorKind::config, "unknown sparse mode '" + s + "' (expected additive|cross)");
}

DenseMode parse_dense_mode(const std::string& s) {
  if (s == "independent") return DenseMode::independent;
  if (s == "shared") return DenseMode::shared;
  if (s == "off") return DenseMode::off;
  fail(ErrorKind::config, "unknown dense mode '" + s + "' (expected independent|shared|off)");
}

void ModelConfig::validate() const {
  const auto check = [](bool ok, const std::string& msg) {
    if (!ok) fail(ErrorKind::config, "model: " + msg);
  };
  check(height > 0 && width > 0 && frames >= 2, "video dimensions must be positive with at least two frames");
  check(channels == 1 || channels == 3, "channels must be 1 or 3");
  check(patch > 0 && patch_t > 0, "patch sizes must be positive");
  check(height % patch == 0 && width % patch == 0, "spatial patch size must divide height and width");
  check(frames % patch_t == 0, "temporal patch size must divide the frame count");
  check(dim > 0 && heads > 0 && dim % heads == 0, "dim must be a positive multiple of heads");
  check(patch_dim() <= dim, "patch vector (" + std::to_string(patch_dim()) + ") must fit in dim");
  check(layers >= 1 && mlp_ratio >= 1, "layers and mlp_ratio must be positive");
  check(schedule_steps >= 1, "schedule_steps must be positive");
}

int ModelConfig::relative_offset_index(int dt, int dr, int dc) const noexcept {
  const int f = frames / patch_t - 1, r = height / patch - 1, c = width / patch - 1;
  dt = std::clamp(dt, -f, f);
  dr = std::clamp(dr, -r, r);
  dc = std::clamp(dc, -c, c);
  return ((dt + f) * (2 * r + 1) + (dr + r)) * (2 * c + 1) + (dc + c);
}

void ModelConfig::write(Manifest& m, const std::string& p) const {
  m.set(p + "height", height);
  m.set(p + "width", width);
  m.set(p + "frames", frames);
  m.set(p + "channels", channels);
  m.set(p + "patch", patch);
  m.set(p + "patch_t", patch_t);
  m.set(p + "dim", dim);
  m.set(p + "layers", layers);
  m.set(p + "heads", heads);
  m.set(p + "mlp_ratio", mlp_ratio);
  m.set(p + "schedule_steps", schedule_steps);
  m.set(p + "sparse", to_string(sparse));
  m.set(p + "dense", to_string(dense));
}

ModelConfig ModelConfig::read(const Manifest& m, const std::string& p) {
  const auto num = [&](const std::string& k) { return std::stoi(m.require(p + k)); };
  ModelConfig c;
  c.height = num("height");
  c.width = num("width");
  c.frames = num("frames");
  c.channels = num("channels");
  c.patch = num("patch");
  c.patch_t = num("patch_t");
  c.dim = num("dim");
  c.layers = num("layers");
  c.heads = num("heads");
  c.mlp_ratio = num("mlp_ratio");
  c.schedule_steps = num("schedule_steps");
  c.sparse = parse_sparse_mode(m.require(p + "sparse"));
  c.dense = parse_dense_mode(m.require(p + "dense"));
  c.validate();
  return c;
}

template <typename S>
std::size_t DenoiserParams<S>::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& v : values) n += static_cast<std::size_t>(v.size());
  return n;
}

template <typename S>
int DenoiserParams<S>::find(const std::string& name) const noexcept {
  for (std::size_t i = 0; i < slots.size(); ++i)
    if (slots[i].name == name) return static_cast<int>(i);
  return -1;
}

template <typename S>
bool DenoiserParams<S>::all_finite() const noexcept {
  for (const auto& v : values)
    if (!v.allFinite()) return false;
  return true;
}

template <typename S>
DenoiserParams<S> allocate_params(const ModelConfig& c) {
  c.validate();
  DenoiserParams<S> p;
  p.config = c;
  p.frozen = default_freeze();
  Builder<S> b{p};
  Layout& L = p.layout;
  L.codec_embed = b.add("codec.embed", ParamGroup::codec, c.dim, c.patch_dim());
  L.codec_bias = b.add("codec.bias", ParamGroup::codec, 1, c.dim);
  L.timestep = b.add("main.timestep", ParamGroup::main, c.schedule_steps, c.dim);
  L.main = b.branch("main", ParamGroup::main, c);
  L.norm_out = b.norm("main.norm_out", ParamGroup::main, c.dim);
  L.head = b.linear("main.head", ParamGroup::main, c.dim, c.dim);
  L.sparse = b.branch("sparse", ParamGroup::sparse, c);
  for (int l = 0; l < c.layers; ++l) {
    const std::string name = "hint" + std::to_string(l);
    if (c.sparse == SparseMode::additive)
      L.hint_linear.push_back(b.linear(name, ParamGroup::hint, c.dim, c.dim));
    else
      L.hint_cross.push_back(b.cross(name, ParamGroup::hint, c));
  }
  if (c.dense == DenseMode::independent) L.dense = b.branch("dense", ParamGroup::dense, c);
  if (c.dense != DenseMode::off)
    for (int l = 0; l < c.layers; ++l) L.cross.push_back(b.cross("cross" + std::to_string(l), ParamGroup::cross, c));
  return p;
}

template <typename S>
DenoiserParams<S> init_params(const ModelConfig& c, std::uint64_t seed) {
  DenoiserParams<S> p = allocate_params<S>(c);
  const Rng root(seed);
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    Mat<S>& v = p.values[i];
    const std::string& name = p.slots[i].name;
    Rng rng = root.fork(Stage::init, i);
    if (ends_with(name, ".gain")) {
      v.setOnes();
    } else if (ends_with(name, ".weight")) {
      const double a = std::sqrt(6.0 / static_cast<double>(v.rows() + v.cols()));
      for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] = static_cast<S>(rng.uniform(-a, a));
    }
  }
  for (const BranchIdx* b : {&p.layout.main, &p.layout.sparse, &p.layout.dense})
    for (const BlockIdx& blk : b->blocks) {
      p[blk.attn.out.weight] *= static_cast<S>(kResidualGain);
      p[blk.fc2.weight] *= static_cast<S>(kResidualGain);
    }
  // Zero-initialized residual projections: the model starts as the bare main branch.
  for (const auto& h : p.layout.hint_linear) {
    p[h.weight].setZero();
    p[h.bias].setZero();
  }
  for (const auto& h : p.layout.hint_cross) {
    p[h.attn.out.weight].setZero();
    p[h.attn.out.bias].setZero();
  }
  for (const auto& x : p.layout.cross) {
    p[x.attn.out.weight].setZero();
    p[x.attn.out.bias].setZero();
  }
  // Cross-attention starts local: the logit bias falls off with token distance.
  std::vector<CrossIdx> crosses = p.layout.hint_cross;
  crosses.insert(crosses.end(), p.layout.cross.begin(), p.layout.cross.end());
  const int f = c.frames / c.patch_t - 1, r = c.height / c.patch - 1, w = c.width / c.patch - 1;
  for (const auto& x : crosses)
    for (int dt = -f; dt <= f; ++dt)
      for (int dr = -r; dr <= r; ++dr)
        for (int dc = -w; dc <= w; ++dc)
          p[x.pos].col(c.relative_offset_index(dt, dr, dc))
              .setConstant(static_cast<S>(-kLocality * (std::abs(dt) + std::abs(dr) + std::abs(dc))));
  // Small head so the initial prediction is near zero but not degenerate.
  p[p.layout.head.weight] *= static_cast<S>(0.1);

  Mat<S>& embed = p[p.layout.codec_embed];
  Mat<S>& bias = p[p.layout.codec_bias];
  embed.setZero();
  bias.setZero();
  for (int i = 0; i < c.patch_dim(); ++i) {
    embed(i, i) = S(1);
    bias(0, i) = S(-1);
  }

  Mat<S>& table = p[p.layout.timestep];
  for (int t = 0; t < c.schedule_steps; ++t)
    for (int j = 0; j < c.dim; j += 2) {
      const double freq = std::pow(1000.0, -static_cast<double>(j) / c.dim);
      table(t, j) = static_cast<S>(std::sin(t * freq));
      if (j + 1 < c.dim) table(t, j + 1) = static_cast<S>(std::cos(t * freq));
    }
  return p;
}

template struct DenoiserParams<float>;
template struct DenoiserParams<double>;
template DenoiserParams<float> allocate_params<float>(const ModelConfig&);
template DenoiserParams<double> allocate_params<double>(const ModelConfig&);
template DenoiserParams<float> init_params<float>(const ModelConfig&, std::uint64_t);
template DenoiserParams<double> init_params<double>(const ModelConfig&, std::uint64_t);

}  // namespace nova::denoiser
