#include "apiscan/dex.hpp"

#include <zlib.h>

#include <cstring>
#include <optional>

#include "apiscan/binary.hpp"
#include "apiscan/error.hpp"
#include "apiscan/opcodes.hpp"

namespace apiscan {

namespace {

constexpr std::size_t kHeaderSize = 0x70;
constexpr std::uint32_t kEndianConstant = 0x12345678;
constexpr std::uint32_t kNoIndex = 0xffffffff;

[[noreturn]] void structural(const std::string& what) { throw Error(Errc::StructuralError, what); }

// Checks that [offset, offset + count * item) lies inside the file.
void require_table(ByteSpan bytes, std::uint32_t offset, std::uint64_t count, std::uint64_t item,
                   const char* table) {
  if (count == 0) return;
  const std::uint64_t end = static_cast<std::uint64_t>(offset) + count * item;
  if (offset < kHeaderSize || end > bytes.size()) {
    structural(std::string(table) + " table out of bounds");
  }
}

std::string read_string_data(ByteSpan bytes, std::uint32_t offset) {
  if (offset >= bytes.size()) structural("string data offset out of bounds");
  const auto len = read_uleb128(bytes, offset);  // utf16 length, informational
  return decode_mutf8(bytes.subspan(len.next));
}

std::vector<EncodedMethod> read_methods(ByteSpan bytes, std::size_t& pos, std::uint32_t count,
                                        std::size_t method_count) {
  std::vector<EncodedMethod> methods;
  methods.reserve(count);
  std::uint64_t idx = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto diff = read_uleb128(bytes, pos);
    const auto access = read_uleb128(bytes, diff.next);
    const auto code = read_uleb128(bytes, access.next);
    pos = code.next;
    idx += diff.value;
    if (idx >= method_count) structural("encoded_method index out of range");
    methods.push_back({static_cast<std::uint32_t>(idx), access.value, code.value});
  }
  return methods;
}

}  // namespace

CodeItem DexFile::code_item(std::uint32_t code_off) const {
  const ByteSpan b(*bytes);
  if (code_off < kHeaderSize || code_off % 4 != 0) structural("misaligned code_item offset");
  CodeItem c;
  c.offset = code_off;
  c.registers_size = read_u16(b, code_off);
  c.tries_size = read_u16(b, code_off + 6);
  c.debug_info_off = read_u32(b, code_off + 8);
  c.insns_size = read_u32(b, code_off + 12);
  c.insns_off = code_off + 16;
  const std::uint64_t insns_end = static_cast<std::uint64_t>(c.insns_off) + 2ull * c.insns_size;
  if (insns_end > b.size()) structural("code_item instructions run past end of file");
  if (c.tries_size > 0) {
    const std::uint64_t tries_off = (insns_end + 3) & ~std::uint64_t{3};
    if (tries_off + 8ull * c.tries_size > b.size()) structural("code_item tries out of bounds");
  }
  if (c.debug_info_off >= b.size()) structural("debug_info offset out of bounds");
  return c;
}

std::string DexFile::proto_descriptor(std::uint32_t proto_idx) const {
  const auto& p = protos.at(proto_idx);
  std::string d = "(";
  for (auto t : p.parameter_type_idx) d += type_name(t);
  d += ')';
  d += type_name(p.return_type_idx);
  return d;
}

DexFile parse_dex(std::span<const std::uint8_t> blob, const DexOptions& options) {
  return parse_dex(std::vector<std::uint8_t>(blob.begin(), blob.end()), options);
}

DexFile parse_dex(std::vector<std::uint8_t> blob, const DexOptions& options) {
  if (blob.size() < 8 || std::memcmp(blob.data(), "dex\n", 4) != 0 || blob[7] != 0) {
    throw Error(Errc::BadMagic, "not a dex file");
  }
  const auto digit = [](std::uint8_t c) { return c >= '0' && c <= '9'; };
  if (!digit(blob[4]) || !digit(blob[5]) || !digit(blob[6])) {
    throw Error(Errc::BadMagic, "malformed dex version");
  }
  const int version = (blob[4] - '0') * 100 + (blob[5] - '0') * 10 + (blob[6] - '0');
  if (version < 35 || version > 39) {
    throw Error(Errc::UnsupportedVersion, "dex version " + std::to_string(version));
  }
  if (blob.size() < kHeaderSize) structural("file shorter than the dex header");

  const ByteSpan b(blob);
  if (read_u32(b, 40) != kEndianConstant) structural("unsupported endian tag");
  const std::uint32_t file_size = read_u32(b, 32);
  if (file_size > blob.size() || file_size < kHeaderSize) {
    structural("header file_size disagrees with buffer");
  }
  if (options.strict_checksum) {
    const uLong sum = adler32(adler32(0L, Z_NULL, 0), blob.data() + 12,
                              static_cast<uInt>(file_size - 12));
    if (sum != read_u32(b, 8)) throw Error(Errc::ChecksumMismatch, "adler32 mismatch");
  }

  DexFile dex;
  dex.version = version;

  const std::uint32_t string_count = read_u32(b, 56), string_off = read_u32(b, 60);
  const std::uint32_t type_count = read_u32(b, 64), type_off = read_u32(b, 68);
  const std::uint32_t proto_count = read_u32(b, 72), proto_off = read_u32(b, 76);
  const std::uint32_t method_count = read_u32(b, 88), method_off = read_u32(b, 92);
  const std::uint32_t class_count = read_u32(b, 96), class_off = read_u32(b, 100);
  require_table(b, string_off, string_count, 4, "string_ids");
  require_table(b, type_off, type_count, 4, "type_ids");
  require_table(b, proto_off, proto_count, 12, "proto_ids");
  require_table(b, method_off, method_count, 8, "method_ids");
  require_table(b, class_off, class_count, 32, "class_defs");

  dex.string_pool.reserve(string_count);
  for (std::uint32_t i = 0; i < string_count; ++i) {
    dex.string_pool.push_back(read_string_data(b, read_u32(b, string_off + 4 * i)));
  }

  dex.type_ids.reserve(type_count);
  for (std::uint32_t i = 0; i < type_count; ++i) {
    const std::uint32_t s = read_u32(b, type_off + 4 * i);
    if (s >= string_count) structural("type_id string index out of range");
    dex.type_ids.push_back(s);
  }

  dex.protos.reserve(proto_count);
  for (std::uint32_t i = 0; i < proto_count; ++i) {
    const std::uint32_t base = proto_off + 12 * i;
    ProtoId p;
    p.shorty_idx = read_u32(b, base);
    p.return_type_idx = read_u32(b, base + 4);
    const std::uint32_t params_off = read_u32(b, base + 8);
    if (p.shorty_idx >= string_count || p.return_type_idx >= type_count) {
      structural("proto_id index out of range");
    }
    if (params_off != 0) {
      const std::uint32_t n = read_u32(b, params_off);
      if (static_cast<std::uint64_t>(params_off) + 4 + 2ull * n > blob.size()) {
        structural("type_list out of bounds");
      }
      for (std::uint32_t k = 0; k < n; ++k) {
        const std::uint16_t t = read_u16(b, params_off + 4 + 2 * k);
        if (t >= type_count) structural("type_list index out of range");
        p.parameter_type_idx.push_back(t);
      }
    }
    dex.protos.push_back(std::move(p));
  }

  dex.method_table.reserve(method_count);
  for (std::uint32_t i = 0; i < method_count; ++i) {
    const std::uint32_t base = method_off + 8 * i;
    MethodId m{read_u16(b, base), read_u16(b, base + 2), read_u32(b, base + 4)};
    if (m.class_idx >= type_count || m.proto_idx >= proto_count || m.name_idx >= string_count) {
      structural("method_id index out of range");
    }
    dex.method_table.push_back(m);
  }

  dex.class_items.reserve(class_count);
  for (std::uint32_t i = 0; i < class_count; ++i) {
    const std::uint32_t base = class_off + 32 * i;
    ClassItem item;
    item.class_idx = read_u32(b, base);
    if (item.class_idx >= type_count) structural("class_def type index out of range");
    const std::uint32_t superclass = read_u32(b, base + 8);
    if (superclass != kNoIndex && superclass >= type_count) structural("superclass index out of range");
    const std::uint32_t data_off = read_u32(b, base + 24);
    if (data_off != 0) {
      if (data_off < kHeaderSize || data_off >= blob.size()) structural("class_data offset out of bounds");
      std::size_t pos = data_off;
      std::uint32_t sizes[4];
      for (auto& s : sizes) {
        const auto v = read_uleb128(b, pos);
        s = v.value;
        pos = v.next;
      }
      // Fields are skipped: index delta and access flags.
      for (std::uint64_t f = 0; f < static_cast<std::uint64_t>(sizes[0]) + sizes[1]; ++f) {
        pos = read_uleb128(b, read_uleb128(b, pos).next).next;
      }
      item.direct_methods = read_methods(b, pos, sizes[2], method_count);
      item.virtual_methods = read_methods(b, pos, sizes[3], method_count);
    }
    dex.class_items.push_back(std::move(item));
  }

  dex.bytes = std::make_shared<const std::vector<std::uint8_t>>(std::move(blob));
  return dex;
}

std::size_t instruction_width(std::span<const std::uint16_t> insns) {
  if (insns.empty()) structural("empty instruction stream");
  const std::uint16_t unit = insns[0];
  const std::uint8_t op = unit & 0xff;
  if (op == 0x00 && unit != 0x0000) {
    auto need = [&](std::size_t n) {
      if (insns.size() < n) structural("payload header runs past end of code");
    };
    switch (unit) {
      case dalvik::kPackedSwitchPayload:
        need(2);
        return 4 + 2 * static_cast<std::size_t>(insns[1]);
      case dalvik::kSparseSwitchPayload:
        need(2);
        return 2 + 4 * static_cast<std::size_t>(insns[1]);
      case dalvik::kFillArrayDataPayload: {
        need(4);
        const std::uint64_t element_width = insns[1];
        const std::uint64_t count = insns[2] | (static_cast<std::uint32_t>(insns[3]) << 16);
        return static_cast<std::size_t>(4 + (element_width * count + 1) / 2);
      }
      default:
        return 1;  // nop with a stray high byte
    }
  }
  return dalvik::kOpcodeWidths[op];
}

std::vector<std::uint16_t> code_units(const DexFile& dex, const CodeItem& code) {
  std::vector<std::uint16_t> units(code.insns_size);
  const std::uint8_t* p = dex.bytes->data() + code.insns_off;
  for (std::size_t i = 0; i < units.size(); ++i) {
    units[i] = static_cast<std::uint16_t>(p[2 * i] | (p[2 * i + 1] << 8));
  }
  return units;
}

void walk_instructions(std::span<const std::uint16_t> insns,
                       const std::function<void(std::size_t, std::size_t)>& visit) {
  std::size_t pc = 0;
  while (pc < insns.size()) {
    const std::size_t width = instruction_width(insns.subspan(pc));
    if (width > insns.size() - pc) {
      structural("instruction at unit " + std::to_string(pc) + " runs past insns_size");
    }
    visit(pc, width);
    pc += width;
  }
}

namespace {

// Calls visit(class_item, kind, method_idx) for every invoke-kind/-range
// instruction, in class_defs order, direct methods before virtual ones.
template <typename Visit>
void for_each_invoke(const DexFile& dex, Visit&& visit) {
  std::vector<std::uint16_t> units;
  for (const auto& cls : dex.class_items) {
    for (const auto* list : {&cls.direct_methods, &cls.virtual_methods}) {
      for (const auto& method : *list) {
        if (method.code_off == 0) continue;
        const CodeItem code = dex.code_item(method.code_off);
        units = code_units(dex, code);
        std::size_t pc = 0;
        while (pc < units.size()) {
          const std::span<const std::uint16_t> rest(units.data() + pc, units.size() - pc);
          const std::size_t width = instruction_width(rest);
          if (width > rest.size()) {
            structural("instruction at unit " + std::to_string(pc) + " runs past insns_size");
          }
          // Both 35c and 3rc carry the method index in the second code unit.
          if (auto kind = invoke_kind_from_opcode(units[pc] & 0xff)) {
            if (units[pc + 1] >= dex.method_table.size()) structural("invoke method index out of range");
            visit(cls, *kind, units[pc + 1]);
          }
          pc += width;
        }
      }
    }
  }
}

}  // namespace

std::optional<MethodRef> resolve_method(const DexFile& dex, std::uint32_t method_idx) {
  if (method_idx >= dex.method_table.size()) structural("method index out of range");
  const auto& m = dex.method_table[method_idx];
  auto cls = normalize_class_descriptor(dex.type_name(m.class_idx));
  if (!cls) return std::nullopt;
  return MethodRef{std::move(*cls), dex.string_pool[m.name_idx], dex.proto_descriptor(m.proto_idx)};
}

std::vector<InvokeSite> extract_invokes(const DexFile& dex) {
  // Resolution cache per method index: 0 unresolved, 1 resolved, 2 dropped.
  std::vector<std::uint8_t> state(dex.method_table.size(), 0);
  std::vector<MethodRef> resolved(dex.method_table.size());
  const ClassItem* current = nullptr;
  std::string caller;
  std::vector<InvokeSite> sites;
  for_each_invoke(dex, [&](const ClassItem& cls, InvokeKind kind, std::uint32_t idx) {
    if (&cls != current) {
      current = &cls;
      caller = normalize_class_descriptor(dex.type_name(cls.class_idx)).value_or("");
    }
    if (state[idx] == 0) {
      auto ref = resolve_method(dex, idx);
      state[idx] = ref ? 1 : 2;
      if (ref) resolved[idx] = std::move(*ref);
    }
    if (state[idx] == 1) sites.push_back(InvokeSite{kind, caller, resolved[idx]});
  });
  return sites;
}

std::vector<std::uint32_t> invoke_counts(const DexFile& dex) {
  std::vector<std::uint32_t> counts(dex.method_table.size(), 0);
  for_each_invoke(dex, [&](const ClassItem&, InvokeKind, std::uint32_t idx) {
    if (counts[idx] < 0xffffffffu) ++counts[idx];
  });
  return counts;
}

}  // namespace apiscan
