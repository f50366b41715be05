#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nova/video.hpp"

namespace nova::metrics {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;
inline constexpr double kPsnrCap = 100.0;

/// Mean SSIM over all valid 11x11 Gaussian windows of the luma planes.
double ssim(const Image& a, const Image& b);

/// SSIM over windows whose footprint holds no edited pixel (mask > 0);
/// nullopt when no such window exists.
std::optional<double> masked_ssim(const Image& a, const Image& b, const Image& edit_mask);

struct BgSsim {
  std::vector<std::optional<double>> per_frame;
  double mean = 0.0;  // over frames with background
};

/// Throws ErrorKind::data when no frame has any background window.
BgSsim bg_ssim(const Video& gen, const Video& src, const MaskSequence& edit_mask);

/// PSNR over every sample, capped at 100 dB.
double psnr(const Video& a, const Video& b);
/// PSNR over pixels where the mask is 0. Throws when there are none.
double background_psnr(const Video& a, const Video& b, const MaskSequence& edit_mask);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string id() const = 0;
  /// Unit-norm feature vector of fixed width.
  virtual std::vector<double> embed(const Image& frame) const = 0;
};

/// 8x8 average-pooled grid per channel, mean-subtracted, L2-normalized.
class ToyEmbedder final : public Embedder {
 public:
  std::string id() const override { return "toy8x8"; }
  std::vector<double> embed(const Image& frame) const override;
};

double cosine(const std::vector<double>& a, const std::vector<double>& b);

struct Series {
  std::vector<double> per_frame;
  double mean = 0.0;
};

/// Cosine similarity of every generated frame to the edited first frame.
Series temporal_consistency(const Video& gen, const Image& edited_first, const Embedder& e);
/// Cosine similarity of each generated frame to the matching source frame.
Series frame_consistency(const Video& gen, const Video& src, const Embedder& e);

struct MetricReport {
  std::string embedder;
  std::string mask_source;   // "none" or where masks came from
  std::string tc_reference;  // "edited_first" or "generated_first"
  int frames = 0;
  Series tc;
  Series fc;
  std::optional<BgSsim> bg_ssim;
  double psnr = 0.0;
  std::optional<double> background_psnr;
};

struct EvalInputs {
  const Video& gen;
  const Video& src;
  const MaskSequence* mask = nullptr;
  const Image* edited_first = nullptr;  // defaults to gen[0]
  std::string mask_source = "none";
};

MetricReport evaluate(const EvalInputs& in, const Embedder& e);

}  // namespace nova::metrics
