#pragma once

#include <span>
#include <string>
#include <vector>

#include "mmer/tensor.hpp"

namespace mmer {

// TNSR parameter files:
//   "TNSR" | version u32 | count u32 | per tensor:
//   name_len u16 | name | rank u8 | extents u32 x rank | payload f32 x numel
// All integers and floats little-endian. Payload is always 32-bit.

inline constexpr std::uint32_t kTensorFileVersion = 1;

template <typename T>
std::vector<char> encode_tensors(std::span<const NamedTensor<T>> tensors);

/// Decoded tensors are leaves without requires_grad.
template <typename T>
std::vector<NamedTensor<T>> decode_tensors(std::span<const char> bytes);

template <typename T>
void save_tensors(const std::string& path, std::span<const NamedTensor<T>> tensors);

template <typename T>
std::vector<NamedTensor<T>> load_tensors(const std::string& path);

}  // namespace mmer
