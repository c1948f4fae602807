#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "apiscan/invoke.hpp"

namespace apiscan {

struct DexOptions {
  // Verify the Adler-32 header checksum; off by default so slightly damaged
  // samples still get scanned.
  bool strict_checksum = false;
};

struct ProtoId {
  std::uint32_t shorty_idx = 0;
  std::uint32_t return_type_idx = 0;
  std::vector<std::uint32_t> parameter_type_idx;
};

struct MethodId {
  std::uint16_t class_idx = 0;
  std::uint16_t proto_idx = 0;
  std::uint32_t name_idx = 0;
};

struct EncodedMethod {
  std::uint32_t method_idx = 0;
  std::uint32_t access_flags = 0;
  std::uint32_t code_off = 0;  // 0 for abstract/native methods
};

struct ClassItem {
  std::uint32_t class_idx = 0;
  std::vector<EncodedMethod> direct_methods;
  std::vector<EncodedMethod> virtual_methods;
};

// Location of a method body inside the file. Tries and debug info are located
// for bounds checking but never decoded.
struct CodeItem {
  std::uint32_t offset = 0;
  std::uint16_t registers_size = 0;
  std::uint16_t tries_size = 0;
  std::uint32_t debug_info_off = 0;
  std::uint32_t insns_size = 0;  // in 16-bit code units
  std::uint32_t insns_off = 0;   // byte offset of the first code unit
};

struct DexFile {
  int version = 0;  // 35..39
  std::vector<std::string> string_pool;
  std::vector<std::uint32_t> type_ids;  // string_pool index per type
  std::vector<ProtoId> protos;
  std::vector<MethodId> method_table;
  std::vector<ClassItem> class_items;
  std::shared_ptr<const std::vector<std::uint8_t>> bytes;

  const std::string& type_name(std::uint32_t type_idx) const { return string_pool[type_ids[type_idx]]; }
  CodeItem code_item(std::uint32_t code_off) const;
  // Full descriptor of a prototype, e.g. "(Ljava/lang/String;I)Z".
  std::string proto_descriptor(std::uint32_t proto_idx) const;
};

// Errors: BadMagic, UnsupportedVersion, ChecksumMismatch (strict only),
// StructuralError for anything out of bounds.
DexFile parse_dex(std::vector<std::uint8_t> blob, const DexOptions& options = {});
DexFile parse_dex(std::span<const std::uint8_t> blob, const DexOptions& options = {});

// Width of the instruction starting at insns[0], in code units. Throws
// StructuralError when the instruction's own header units are missing.
std::size_t instruction_width(std::span<const std::uint16_t> insns);

// Decodes a code item's instruction stream into host-order code units.
std::vector<std::uint16_t> code_units(const DexFile& dex, const CodeItem& code);

// Calls `visit(unit_offset, width)` for every instruction. Throws
// StructuralError if an instruction runs past the end of the stream.
void walk_instructions(std::span<const std::uint16_t> insns,
                       const std::function<void(std::size_t, std::size_t)>& visit);

// One InvokeSite per invoke-kind/-range instruction in every method body,
// in class_defs order, direct methods before virtual ones. Targets on
// primitive-array receivers are dropped.
std::vector<InvokeSite> extract_invokes(const DexFile& dex);

// Invoke instructions per method_ids index, from the same walk as
// extract_invokes but without building sites.
std::vector<std::uint32_t> invoke_counts(const DexFile& dex);

// Target of method_ids[method_idx]; nullopt for primitive-array receivers.
std::optional<MethodRef> resolve_method(const DexFile& dex, std::uint32_t method_idx);

}  // namespace apiscan
