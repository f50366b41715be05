#include "nova/denoiser/train.hpp"

#include <cmath>
#include <fstream>

#include "nova/error.hpp"
#include "nova/parallel.hpp"

namespace nova::denoiser {
namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void freeze_all_but(DenoiserParams<float>& p, std::initializer_list<ParamGroup> open) {
  for (int g = 0; g < kGroupCount; ++g) p.set_frozen(static_cast<ParamGroup>(g), true);
  for (ParamGroup g : open) p.set_frozen(g, false);
}

// Copies main-branch weights into the structurally identical dense branch.
void copy_main_to_dense(DenoiserParams<float>& p) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.slots[i].group != ParamGroup::dense) continue;
    const std::string& name = p.slots[i].name;  // "dense.<rest>"
    const int src = p.find("main" + name.substr(5));
    if (src >= 0) p.values[i] = p.values[static_cast<std::size_t>(src)];
  }
}

}  // namespace

const char* to_string(FreezePolicy p) noexcept {
  switch (p) {
    case FreezePolicy::none: return "none";
    case FreezePolicy::cross_only: return "cross_only";
    case FreezePolicy::two_phase: return "two_phase";
  }
  return "unknown";
}

FreezePolicy parse_freeze_policy(const std::string& s) {
  if (s == "none") return FreezePolicy::none;
  if (s == "cross_only") return FreezePolicy::cross_only;
  if (s == "two_phase") return FreezePolicy::two_phase;
  fail(ErrorKind::config, "unknown freeze policy '" + s + "' (expected none|cross_only|two_phase)");
}

AdamW::AdamW(const DenoiserParams<float>& params, AdamWConfig cfg) : cfg_(cfg) {
  if (!(cfg_.lr >= 0.0) || !(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0) || !(cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0) ||
      !(cfg_.eps > 0.0) || !(cfg_.weight_decay >= 0.0))
    fail(ErrorKind::config, "optimizer: lr >= 0, betas in [0, 1), eps > 0 and weight_decay >= 0 required");
  m_ = zero_grads(params);
  v_ = zero_grads(params);
  for (const auto& slot : params.slots) decay_.push_back(ends_with(slot.name, ".weight"));
}

void AdamW::step(DenoiserParams<float>& params, const std::vector<Mat<float>>& grads) {
  require(grads.size() == params.size() && m_.size() == params.size(), "AdamW: gradient list does not match parameters");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const auto b1 = static_cast<float>(cfg_.beta1), b2 = static_cast<float>(cfg_.beta2);
  const auto step_size = static_cast<float>(cfg_.lr / c1);
  const auto inv_c2 = static_cast<float>(1.0 / c2);
  const auto eps = static_cast<float>(cfg_.eps);
  const auto decay = static_cast<float>(cfg_.lr * cfg_.weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params.trainable(i)) continue;
    Mat<float>& p = params.values[i];
    m_[i] = b1 * m_[i] + (1.0f - b1) * grads[i];
    v_[i] = b2 * v_[i] + (1.0f - b2) * grads[i].cwiseAbs2();
    const Mat<float> update = m_[i].array() / ((v_[i].array() * inv_c2).sqrt() + eps);
    if (decay_[i]) p -= decay * p;
    p -= step_size * update;
  }
}

void TrainConfig::validate() const {
  const auto check = [](bool ok, const std::string& msg) {
    if (!ok) fail(ErrorKind::config, "train: " + msg);
  };
  check(steps >= 1, "steps must be positive");
  check(batch >= 1, "batch must be positive");
  check(workers >= 1, "workers must be positive");
  check(smooth_window >= 1, "smooth window must be positive");
  check(phase_split > 0.0 && phase_split < 1.0, "phase_split must lie in (0, 1)");
  check(optimizer.lr >= 0.0 && std::isfinite(optimizer.lr), "lr must be finite and non-negative");
  check(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0, "beta1 must lie in [0, 1)");
  check(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0, "beta2 must lie in [0, 1)");
  check(optimizer.eps > 0.0, "eps must be positive");
  check(optimizer.weight_decay >= 0.0, "weight_decay must be non-negative");
  check(keyframes.value >= (keyframes.kind == anchor::KeyframeMode::Kind::fixed ? 1 : 0),
        "keyframe interval must be positive");
  degrade.validate();
  fidelity.validate();
}

TrainingSample make_training_sample(const std::vector<Video>& clips, const ModelConfig& model, const TrainConfig& cfg,
                                    long long step, int slot) {
  require(!clips.empty(), "training: empty clip set");
  const auto draw = static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(cfg.batch) +
                    static_cast<std::uint64_t>(slot);
  Rng rng = Rng(cfg.seed).fork(Stage::train_step, draw);
  const auto clip = static_cast<std::size_t>(rng.below(clips.size()));
  TrainingSample s;
  s.target = clips[clip];
  s.timestep = static_cast<int>(rng.below(static_cast<std::uint64_t>(model.schedule_steps)));

  fidelity::FidelityConfig fc = cfg.fidelity;
  fc.seed = rng.next_u64();
  fidelity::PseudoSource ps = fidelity::synth_pseudo_source(s.target, clips, fc, rng.fork(1));
  s.pseudo_source = std::move(ps.video);
  anchor::DegradedReference ref = anchor::build_degraded_reference(s.target, cfg.degrade, cfg.keyframes, rng.fork(2));
  s.reference = std::move(ref.video);

  const TokenGeometry g = geometry_for(model, s.target.length(), s.target.height(), s.target.width());
  s.noise.resize(g.count(), model.dim);
  Rng noise = rng.fork(3);
  for (Eigen::Index i = 0; i < s.noise.size(); ++i) s.noise.data()[i] = static_cast<float>(noise.normal());

  s.log.set("step", static_cast<std::int64_t>(step));
  s.log.set("slot", slot);
  s.log.set("clip", static_cast<std::uint64_t>(clip));
  s.log.set("timestep", s.timestep);
  s.log.merge(ps.log, "fidelity.");
  s.log.merge(ref.manifest(), "anchor.");
  return s;
}

TrainResult train(const std::vector<Video>& clips, DenoiserParams<float> params, const TrainConfig& cfg,
                  const StepCallback& on_step) {
  cfg.validate();
  require(!clips.empty(), "training: empty clip set");
  const ModelConfig& mc = params.config;
  for (const auto& c : clips)
    if (c.length() != mc.frames || c.height() != mc.height || c.width() != mc.width || c.channels() != mc.channels)
      fail(ErrorKind::data, "training: clip shape differs from the model's " + std::to_string(mc.frames) + "x" +
                                std::to_string(mc.height) + "x" + std::to_string(mc.width) + " raster");
  const NoiseSchedule schedule = NoiseSchedule::cosine(mc.schedule_steps);
  if (cfg.freeze != FreezePolicy::none && mc.dense == DenseMode::off)
    fail(ErrorKind::config, "train: freeze policy '" + std::string(to_string(cfg.freeze)) +
                                "' needs a dense branch to train");

  ForwardOptions options;
  const int phase_one = cfg.freeze == FreezePolicy::two_phase
                            ? std::max(1, static_cast<int>(std::lround(cfg.steps * cfg.phase_split)))
                            : 0;
  switch (cfg.freeze) {
    case FreezePolicy::none: params.frozen = default_freeze(); break;
    case FreezePolicy::cross_only: freeze_all_but(params, {ParamGroup::cross}); break;
    case FreezePolicy::two_phase:
      freeze_all_but(params, {ParamGroup::main, ParamGroup::sparse, ParamGroup::hint});
      options.dense = false;
      break;
  }

  AdamW opt(params, cfg.optimizer);
  TrainResult result;
  result.losses.reserve(static_cast<std::size_t>(cfg.steps));
  const auto batch = static_cast<std::size_t>(cfg.batch);
  std::vector<TrainingSample> samples(batch);
  std::vector<LossResult<float>> parts(batch);

  for (int step = 0; step < cfg.steps; ++step) {
    if (cfg.freeze == FreezePolicy::two_phase && step == phase_one) {
      if (mc.dense == DenseMode::independent) copy_main_to_dense(params);
      freeze_all_but(params, {ParamGroup::cross});
      options.dense = true;
    }
    parallel_for(batch, cfg.workers, [&](std::size_t b) {
      samples[b] = make_training_sample(clips, mc, cfg, step, static_cast<int>(b));
      parts[b] = loss(samples[b], params, schedule, options);
    });
    // Fixed summation order keeps the update independent of the worker count.
    std::vector<Mat<float>> grads = std::move(parts[0].grads);
    double total = parts[0].loss;
    for (std::size_t b = 1; b < batch; ++b) {
      total += parts[b].loss;
      for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += parts[b].grads[i];
    }
    const double mean = total / static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b)
      if (!std::isfinite(parts[b].loss))
        fail(ErrorKind::numeric, "training loss is not finite at step " + std::to_string(step) + "; sample:\n" +
                                     samples[b].log.to_string());
    if (batch > 1)
      for (auto& g : grads) g /= static_cast<float>(batch);
    opt.step(params, grads);
    if (!params.all_finite())
      fail(ErrorKind::numeric, "parameters became non-finite at step " + std::to_string(step) + "; sample:\n" +
                                   samples[0].log.to_string());
    result.losses.push_back(mean);
    if (on_step) on_step(step, mean);
  }
  result.params = std::move(params);
  return result;
}

std::vector<double> smooth(const std::vector<double>& losses, int window) {
  require(window >= 1, "smooth: window must be positive");
  std::vector<double> out(losses.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    sum += losses[i];
    if (i >= static_cast<std::size_t>(window)) sum -= losses[i - static_cast<std::size_t>(window)];
    const std::size_t n = std::min(i + 1, static_cast<std::size_t>(window));
    out[i] = sum / static_cast<double>(n);
  }
  return out;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& losses) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::data, "cannot write loss curve to " + path.string());
  out << "step,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) out << i << ',' << format_double(losses[i]) << '\n';
  if (!out) fail(ErrorKind::data, "failed writing " + path.string());
}

}  // namespace nova::denoiser
