#pragma once

// .nvt container: each record is
//   "NVT1" | u32 rank | u64 dims[rank] | f32 payload[prod(dims)]
// with every integer and float little-endian. A file holds one or more
// records back to back; names live in an accompanying manifest when needed.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "nova/video.hpp"

namespace nova {

struct TensorBlob {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<float> data;

  TensorBlob() = default;
  TensorBlob(std::string name, std::vector<std::uint64_t> shape, std::vector<float> data);

  std::uint64_t element_count() const noexcept;
  friend bool operator==(const TensorBlob&, const TensorBlob&) = default;
};

void write_nvt_record(std::ostream& out, const TensorBlob& blob);
/// Returns false on clean end of stream; throws on truncated or corrupt data.
bool read_nvt_record(std::istream& in, TensorBlob& blob);

void write_nvt(const std::filesystem::path& path, const std::vector<TensorBlob>& blobs);
std::vector<TensorBlob> read_nvt(const std::filesystem::path& path);

TensorBlob to_blob(const Video& v, std::string name = "video");
Video video_from_blob(const TensorBlob& blob);
TensorBlob to_blob(const MaskSequence& m, std::string name = "mask");
MaskSequence masks_from_blob(const TensorBlob& blob);

}  // namespace nova
