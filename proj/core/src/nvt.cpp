#include "nova/nvt.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>

#include "nova/error.hpp"

namespace nova {
namespace {

constexpr std::array<char, 4> kMagic = {'N', 'V', 'T', '1'};
constexpr std::uint32_t kMaxRank = 8;

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) fail(ErrorKind::data, "nvt: truncated header");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

}  // namespace

TensorBlob::TensorBlob(std::string n, std::vector<std::uint64_t> s, std::vector<float> d)
    : name(std::move(n)), shape(std::move(s)), data(std::move(d)) {
  require(data.size() == element_count(), "tensor blob: element count does not match shape");
}

std::uint64_t TensorBlob::element_count() const noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::uint64_t{1}, std::multiplies<>());
}

void write_nvt_record(std::ostream& out, const TensorBlob& blob) {
  require(blob.data.size() == blob.element_count(), "nvt: element count does not match shape");
  require(blob.shape.size() <= kMaxRank, "nvt: rank too large");
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(blob.shape.size()));
  for (std::uint64_t d : blob.shape) put_le<std::uint64_t>(out, d);
  for (float v : blob.data) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
}

bool read_nvt_record(std::istream& in, TensorBlob& blob) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() == 0 && in.eof()) return false;
  if (!in || magic != kMagic) fail(ErrorKind::data, "nvt: bad magic");
  const auto rank = get_le<std::uint32_t>(in);
  if (rank > kMaxRank) fail(ErrorKind::data, "nvt: rank too large");
  blob.name.clear();
  blob.shape.assign(rank, 0);
  for (auto& d : blob.shape) d = get_le<std::uint64_t>(in);
  const std::uint64_t count = blob.element_count();
  if (count > (std::uint64_t{1} << 34)) fail(ErrorKind::data, "nvt: payload too large");
  std::vector<unsigned char> raw(count * 4);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::uint64_t>(in.gcount()) != raw.size()) fail(ErrorKind::data, "nvt: truncated payload");
  blob.data.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(raw[4 * i]) | (static_cast<std::uint32_t>(raw[4 * i + 1]) << 8) |
                               (static_cast<std::uint32_t>(raw[4 * i + 2]) << 16) |
                               (static_cast<std::uint32_t>(raw[4 * i + 3]) << 24);
    blob.data[i] = std::bit_cast<float>(bits);
  }
  return true;
}

void write_nvt(const std::filesystem::path& path, const std::vector<TensorBlob>& blobs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::data, "nvt: cannot open for writing: " + path.string());
  for (const auto& b : blobs) write_nvt_record(out, b);
  out.flush();
  if (!out) fail(ErrorKind::data, "nvt: write failed: " + path.string());
}

std::vector<TensorBlob> read_nvt(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::data, "nvt: cannot open: " + path.string());
  std::vector<TensorBlob> out;
  TensorBlob blob;
  while (read_nvt_record(in, blob)) out.push_back(blob);
  if (out.empty()) fail(ErrorKind::data, "nvt: no records in " + path.string());
  return out;
}

TensorBlob to_blob(const Video& v, std::string name) {
  require(!v.empty(), "nvt: empty video");
  std::vector<float> data;
  data.reserve(static_cast<std::size_t>(v.length()) * v.frame(0).size());
  for (const auto& f : v.frames()) data.insert(data.end(), f.data().begin(), f.data().end());
  return TensorBlob(std::move(name),
                    {static_cast<std::uint64_t>(v.length()), static_cast<std::uint64_t>(v.height()),
                     static_cast<std::uint64_t>(v.width()), static_cast<std::uint64_t>(v.channels())},
                    std::move(data));
}

Video video_from_blob(const TensorBlob& blob) {
  if (blob.shape.size() != 4) fail(ErrorKind::data, "nvt: video record must have rank 4");
  const auto n = static_cast<int>(blob.shape[0]);
  const auto h = static_cast<int>(blob.shape[1]);
  const auto w = static_cast<int>(blob.shape[2]);
  const auto c = static_cast<int>(blob.shape[3]);
  if (c != 1 && c != 3) fail(ErrorKind::data, "nvt: video channels must be 1 or 3");
  const std::size_t per = static_cast<std::size_t>(h) * w * c;
  std::vector<Image> frames;
  frames.reserve(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    auto first = blob.data.begin() + static_cast<std::ptrdiff_t>(t * per);
    frames.emplace_back(h, w, c, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(per)));
  }
  return Video(std::move(frames));
}

TensorBlob to_blob(const MaskSequence& m, std::string name) {
  require(!m.empty(), "nvt: empty mask sequence");
  std::vector<float> data;
  for (const auto& f : m.masks()) data.insert(data.end(), f.data().begin(), f.data().end());
  return TensorBlob(std::move(name),
                    {static_cast<std::uint64_t>(m.length()), static_cast<std::uint64_t>(m.height()),
                     static_cast<std::uint64_t>(m.width())},
                    std::move(data));
}

MaskSequence masks_from_blob(const TensorBlob& blob) {
  if (blob.shape.size() != 3) fail(ErrorKind::data, "nvt: mask record must have rank 3");
  const auto n = static_cast<int>(blob.shape[0]);
  const auto h = static_cast<int>(blob.shape[1]);
  const auto w = static_cast<int>(blob.shape[2]);
  const std::size_t per = static_cast<std::size_t>(h) * w;
  std::vector<Image> masks;
  for (int t = 0; t < n; ++t) {
    auto first = blob.data.begin() + static_cast<std::ptrdiff_t>(t * per);
    masks.emplace_back(h, w, 1, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(per)));
  }
  return MaskSequence(std::move(masks));
}

}  // namespace nova
