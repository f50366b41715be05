#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "nova/anchor.hpp"
#include "nova/denoiser/model.hpp"
#include "nova/fidelity.hpp"

namespace nova::denoiser {

/// none: train every non-codec group. cross_only: only cross-attention
/// trains. two_phase: main, sparse and hints train first with the dense path
/// disabled; then the dense branch is copied from the main branch and only
/// cross-attention trains.
enum class FreezePolicy { none, cross_only, two_phase };

const char* to_string(FreezePolicy p) noexcept;
FreezePolicy parse_freeze_policy(const std::string& s);

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Decoupled weight decay on ".weight" tensors only; frozen tensors are skipped.
class AdamW {
 public:
  AdamW(const DenoiserParams<float>& params, AdamWConfig cfg);
  void step(DenoiserParams<float>& params, const std::vector<Mat<float>>& grads);
  long long steps_taken() const noexcept { return t_; }
  const AdamWConfig& config() const noexcept { return cfg_; }
  void set_lr(double lr) noexcept { cfg_.lr = lr; }

 private:
  AdamWConfig cfg_;
  std::vector<Mat<float>> m_, v_;
  std::vector<bool> decay_;
  long long t_ = 0;
};

struct TrainConfig {
  std::uint64_t seed = 0;
  int steps = 2000;
  int batch = 1;
  AdamWConfig optimizer{};
  FreezePolicy freeze = FreezePolicy::none;
  /// Fraction of steps in the first phase of two_phase training.
  double phase_split = 0.5;
  int workers = 1;
  int smooth_window = 100;
  anchor::KeyframeMode keyframes = anchor::KeyframeMode::random(2);
  anchor::DegradationConfig degrade{};
  fidelity::FidelityConfig fidelity{};

  void validate() const;
};

/// Draws clip, timestep, pseudo-source, degraded reference and noise for one
/// (step, slot) pair. `pool` supplies filler clips for the fidelity pipe.
TrainingSample make_training_sample(const std::vector<Video>& clips, const ModelConfig& model, const TrainConfig& cfg,
                                    long long step, int slot);

struct TrainResult {
  DenoiserParams<float> params;
  std::vector<double> losses;  // per step, mean over the batch
};

using StepCallback = std::function<void(int step, double loss)>;

/// Throws ErrorKind::numeric with the offending sample manifest when a loss
/// or parameter turns non-finite.
TrainResult train(const std::vector<Video>& clips, DenoiserParams<float> params, const TrainConfig& cfg,
                  const StepCallback& on_step = {});

/// Trailing moving average; entry i averages losses[max(0, i-w+1)..i].
std::vector<double> smooth(const std::vector<double>& losses, int window);

void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& losses);

}  // namespace nova::denoiser
