#pragma once

#include <array>
#include <cstdint>

namespace apiscan::dalvik {

// Instruction width in 16-bit code units, indexed by opcode byte.
//
// Generated from the instruction-format column of the Dalvik bytecode
// reference (dex 035-039): 10x/12x/11n/11x/10t = 1, 20t/22x/21t/21s/21h/21c/
// 23x/22b/22t/22s/22c = 2, 30t/32x/31i/31t/31c/35c/3rc = 3, 45cc/4rcc = 4,
// 51l = 5. Unused slots (3e-43, 73, 79-7a, e3-f9) decode as 10x, as ART does.
// Opcode 0x00 is also the lead unit of the three variable-width payloads;
// see payload_width().
// clang-format off
inline constexpr std::array<std::uint8_t, 256> kOpcodeWidths = {
    // 0x00
    1, 1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 1, 1, 1, 1, 1,
    // 0x10
    1, 1, 1, 2, 3, 2, 2, 3, 5, 2, 2, 3, 2, 1, 1, 2,
    // 0x20
    2, 1, 2, 2, 3, 3, 3, 1, 1, 2, 3, 3, 3, 2, 2, 2,
    // 0x30
    2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 1, 1,
    // 0x40
    1, 1, 1, 1, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2,
    // 0x50
    2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2,
    // 0x60
    2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 3, 3,
    // 0x70
    3, 3, 3, 1, 3, 3, 3, 3, 3, 1, 1, 1, 1, 1, 1, 1,
    // 0x80
    1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1,
    // 0x90
    2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2,
    // 0xa0
    2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2,
    // 0xb0
    1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1,
    // 0xc0
    1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1,
    // 0xd0
    2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2,
    // 0xe0
    2, 2, 2, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1,
    // 0xf0
    1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 4, 4, 3, 3, 2, 2,
};
// clang-format on

inline constexpr std::uint16_t kPackedSwitchPayload = 0x0100;
inline constexpr std::uint16_t kSparseSwitchPayload = 0x0200;
inline constexpr std::uint16_t kFillArrayDataPayload = 0x0300;

inline constexpr std::uint8_t kInvokePolymorphic = 0xfa;
inline constexpr std::uint8_t kInvokePolymorphicRange = 0xfb;
inline constexpr std::uint8_t kInvokeCustom = 0xfc;
inline constexpr std::uint8_t kInvokeCustomRange = 0xfd;

}  // namespace apiscan::dalvik
