#include "nova/denoiser/checkpoint.hpp"

#include "nova/error.hpp"
#include "nova/nvt.hpp"

namespace nova::denoiser {
namespace {

std::string shape_string(const Mat<float>& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

}  // namespace

std::filesystem::path checkpoint_manifest_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".manifest");
}

void save_checkpoint(const std::filesystem::path& path, const DenoiserParams<float>& params) {
  std::vector<TensorBlob> blobs;
  blobs.reserve(params.size());
  Manifest m;
  params.config.write(m);
  for (int g = 0; g < kGroupCount; ++g) {
    const auto group = static_cast<ParamGroup>(g);
    m.set(std::string("frozen.") + to_string(group), params.is_frozen(group));
  }
  m.set("params.count", static_cast<std::uint64_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Mat<float>& v = params.values[i];
    const std::string key = "param." + std::to_string(i);
    m.set(key + ".name", params.slots[i].name);
    m.set(key + ".shape", shape_string(v));
    m.set(key + ".group", to_string(params.slots[i].group));
    blobs.emplace_back(params.slots[i].name,
                       std::vector<std::uint64_t>{static_cast<std::uint64_t>(v.rows()), static_cast<std::uint64_t>(v.cols())},
                       std::vector<float>(v.data(), v.data() + v.size()));
  }
  write_nvt(path, blobs);
  m.write(checkpoint_manifest_path(path));
}

DenoiserParams<float> load_checkpoint(const std::filesystem::path& path) {
  const Manifest m = Manifest::read(checkpoint_manifest_path(path));
  DenoiserParams<float> params = allocate_params<float>(ModelConfig::read(m));
  for (int g = 0; g < kGroupCount; ++g) {
    const auto group = static_cast<ParamGroup>(g);
    params.set_frozen(group, m.require(std::string("frozen.") + to_string(group)) == "true");
  }
  const std::vector<TensorBlob> blobs = read_nvt(path);
  if (blobs.size() != params.size() || m.require("params.count") != std::to_string(params.size()))
    fail(ErrorKind::data, "checkpoint " + path.string() + ": expected " + std::to_string(params.size()) +
                              " tensors, found " + std::to_string(blobs.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Mat<float>& v = params.values[i];
    const std::string key = "param." + std::to_string(i);
    const TensorBlob& b = blobs[i];
    if (m.require(key + ".name") != params.slots[i].name || m.require(key + ".shape") != shape_string(v) ||
        b.shape.size() != 2 || b.shape[0] != static_cast<std::uint64_t>(v.rows()) ||
        b.shape[1] != static_cast<std::uint64_t>(v.cols()))
      fail(ErrorKind::data, "checkpoint " + path.string() + ": tensor " + std::to_string(i) + " ('" +
                                params.slots[i].name + "') does not match the model layout");
    std::copy(b.data.begin(), b.data.end(), v.data());
  }
  return params;
}

}  // namespace nova::denoiser
