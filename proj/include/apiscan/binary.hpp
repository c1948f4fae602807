#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "apiscan/error.hpp"

namespace apiscan {

using ByteSpan = std::span<const std::uint8_t>;

struct Uleb128 {
  std::uint32_t value;
  std::size_t next;  // offset just past the encoding
};

// Unsigned little-endian base-128, at most 5 bytes (32-bit payload).
// Throws TruncatedEncoding when the run leaves `bytes`, Overlong when the
// fifth byte still has its continuation bit set.
Uleb128 read_uleb128(ByteSpan bytes, std::size_t offset);

// Decodes a NUL-terminated modified-UTF-8 run into standard UTF-8.
// 0xC0 0x80 becomes U+0000; surrogate pairs are recombined; a lone surrogate
// is kept in its three-byte form.
std::string decode_mutf8(ByteSpan bytes);

// Little-endian fixed-width reads with bounds checking (StructuralError).
std::uint16_t read_u16(ByteSpan bytes, std::size_t offset);
std::uint32_t read_u32(ByteSpan bytes, std::size_t offset);

}  // namespace apiscan
