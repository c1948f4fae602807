#include "apiscan/binary.hpp"

namespace apiscan {

Uleb128 read_uleb128(ByteSpan bytes, std::size_t offset) {
  std::uint32_t value = 0;
  for (int i = 0; i < 5; ++i) {
    if (offset + i >= bytes.size()) {
      throw Error(Errc::TruncatedEncoding,
                  "uleb128 runs past end of buffer at offset " + std::to_string(offset));
    }
    const std::uint8_t b = bytes[offset + i];
    value |= static_cast<std::uint32_t>(b & 0x7f) << (7 * i);
    if ((b & 0x80) == 0) return {value, offset + i + 1};
  }
  throw Error(Errc::Overlong, "uleb128 longer than 5 bytes at offset " + std::to_string(offset));
}

namespace {

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else {
    out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  }
}

[[noreturn]] void bad_sequence(std::size_t at) {
  throw Error(Errc::InvalidSequence, "invalid MUTF-8 byte at position " + std::to_string(at));
}

}  // namespace

std::string decode_mutf8(ByteSpan bytes) {
  std::string out;
  std::size_t i = 0;
  // Pending high surrogate, 0 when none.
  std::uint32_t high = 0;
  auto flush_high = [&] {
    if (high != 0) {
      append_utf8(out, high);
      high = 0;
    }
  };
  auto continuation = [&](std::size_t at) -> std::uint32_t {
    if (at >= bytes.size() || (bytes[at] & 0xc0) != 0x80) bad_sequence(at);
    return bytes[at] & 0x3f;
  };

  while (true) {
    if (i >= bytes.size()) {
      throw Error(Errc::InvalidSequence, "MUTF-8 run is not NUL-terminated");
    }
    const std::uint8_t b = bytes[i];
    if (b == 0x00) break;
    std::uint32_t cp;
    if (b < 0x80) {
      cp = b;
      i += 1;
    } else if ((b & 0xe0) == 0xc0) {
      cp = (static_cast<std::uint32_t>(b & 0x1f) << 6) | continuation(i + 1);
      // Only U+0000 may use a non-shortest two-byte form.
      if (cp < 0x80 && cp != 0) bad_sequence(i);
      i += 2;
    } else if ((b & 0xf0) == 0xe0) {
      cp = (static_cast<std::uint32_t>(b & 0x0f) << 12) | (continuation(i + 1) << 6) |
           continuation(i + 2);
      if (cp < 0x800) bad_sequence(i);
      i += 3;
    } else {
      bad_sequence(i);
    }

    if (cp >= 0xd800 && cp <= 0xdbff) {
      flush_high();
      high = cp;
      continue;
    }
    if (cp >= 0xdc00 && cp <= 0xdfff && high != 0) {
      append_utf8(out, 0x10000 + ((high - 0xd800) << 10) + (cp - 0xdc00));
      high = 0;
      continue;
    }
    flush_high();
    append_utf8(out, cp);
  }
  flush_high();
  return out;
}

std::uint16_t read_u16(ByteSpan bytes, std::size_t offset) {
  if (offset > bytes.size() || bytes.size() - offset < 2) {
    throw Error(Errc::StructuralError, "u16 read out of bounds at " + std::to_string(offset));
  }
  return static_cast<std::uint16_t>(bytes[offset] | (bytes[offset + 1] << 8));
}

std::uint32_t read_u32(ByteSpan bytes, std::size_t offset) {
  if (offset > bytes.size() || bytes.size() - offset < 4) {
    throw Error(Errc::StructuralError, "u32 read out of bounds at " + std::to_string(offset));
  }
  return static_cast<std::uint32_t>(bytes[offset]) |
         (static_cast<std::uint32_t>(bytes[offset + 1]) << 8) |
         (static_cast<std::uint32_t>(bytes[offset + 2]) << 16) |
         (static_cast<std::uint32_t>(bytes[offset + 3]) << 24);
}

}  // namespace apiscan
