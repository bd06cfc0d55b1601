#include "mmer/serialize.hpp"

#include <fstream>
#include <limits>
#include <stdexcept>

#include "mmer/binary_io.hpp"

namespace mmer {

namespace binio {

std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, std::span<const char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace binio

template <typename T>
std::vector<char> encode_tensors(std::span<const NamedTensor<T>> tensors) {
  binio::Writer w;
  w.bytes("TNSR");
  w.u32(kTensorFileVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw std::invalid_argument("tensor name too long: " + name.substr(0, 32) + "...");
    }
    if (tensor.rank() > std::numeric_limits<std::uint8_t>::max()) {
      throw std::invalid_argument("tensor rank too large: " + name);
    }
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
    w.u8(static_cast<std::uint8_t>(tensor.rank()));
    for (std::size_t extent : tensor.shape()) w.u32(static_cast<std::uint32_t>(extent));
    for (T v : tensor.data()) w.f32(static_cast<float>(v));
  }
  return w.buffer();
}

template <typename T>
std::vector<NamedTensor<T>> decode_tensors(std::span<const char> bytes) {
  binio::Reader r(bytes);
  r.expect_magic("TNSR", "tensor file");
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kTensorFileVersion) {
    throw ParseError("tensor file: unsupported version " + std::to_string(version), version_at);
  }
  const std::uint32_t count = r.u32("tensor count");
  std::vector<NamedTensor<T>> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = r.u16("name length");
    std::string name = r.bytes(name_len, "tensor name");
    const std::uint8_t rank = r.u8("rank");
    Shape shape(rank);
    std::size_t numel = 1;
    bool oversized = false;
    for (auto& extent : shape) {
      extent = r.u32("extent");
      // Bounded by the bytes left, so a corrupt extent cannot overflow numel.
      if (extent != 0 && numel > r.remaining() / extent) oversized = true;
      if (!oversized) numel *= extent;
    }
    if (oversized) {
      throw ParseError("tensor file: extents of '" + name + "' exceed the remaining payload",
                       r.offset());
    }
    r.require(numel * 4, "payload of '" + name + "'");
    std::vector<T> data(numel);
    for (auto& v : data) v = static_cast<T>(r.f32("payload"));
    out.push_back({std::move(name), Tensor<T>::from(std::move(shape), std::move(data))});
  }
  if (r.remaining() != 0) {
    throw ParseError("tensor file: " + std::to_string(r.remaining()) + " trailing bytes", r.offset());
  }
  return out;
}

template <typename T>
void save_tensors(const std::string& path, std::span<const NamedTensor<T>> tensors) {
  binio::write_file(path, encode_tensors(tensors));
}

template <typename T>
std::vector<NamedTensor<T>> load_tensors(const std::string& path) {
  return decode_tensors<T>(binio::read_file(path));
}

#define MMER_INSTANTIATE_SERIALIZE(T)                                                \
  template std::vector<char> encode_tensors(std::span<const NamedTensor<T>>);        \
  template std::vector<NamedTensor<T>> decode_tensors(std::span<const char>);        \
  template void save_tensors(const std::string&, std::span<const NamedTensor<T>>);   \
  template std::vector<NamedTensor<T>> load_tensors(const std::string&);

MMER_INSTANTIATE_SERIALIZE(float)
MMER_INSTANTIATE_SERIALIZE(double)

}  // namespace mmer
