#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace apiscan {

// A resolved invocation target. `class_path` is the slash-separated class name
// with descriptor decoration removed ("java/io/FileInputStream").
struct MethodRef {
  std::string class_path;
  std::string name;
  std::string descriptor;  // "([B)I"

  // class_path minus its final segment; empty for the default package.
  std::string_view package() const noexcept {
    const auto slash = class_path.rfind('/');
    return slash == std::string::npos ? std::string_view{}
                                      : std::string_view(class_path).substr(0, slash);
  }

  auto operator<=>(const MethodRef&) const = default;
  bool operator==(const MethodRef&) const = default;
};

enum class InvokeKind : std::uint8_t {
  Virtual,
  Super,
  Direct,
  Static,
  Interface,
  VirtualRange,
  SuperRange,
  DirectRange,
  StaticRange,
  InterfaceRange,
};

// Dalvik opcode for each kind: 0x6e..0x72 and 0x74..0x78.
std::uint8_t opcode_of(InvokeKind kind) noexcept;
std::optional<InvokeKind> invoke_kind_from_opcode(std::uint8_t opcode) noexcept;

std::string_view kind_token(InvokeKind kind) noexcept;  // "invoke-virtual/range"
std::optional<InvokeKind> parse_kind_token(std::string_view token) noexcept;

struct InvokeSite {
  InvokeKind kind = InvokeKind::Virtual;
  std::string caller_class;  // class path, may be empty
  MethodRef target;

  auto operator<=>(const InvokeSite&) const = default;
  bool operator==(const InvokeSite&) const = default;
};

// Strips leading '[' runs, then the 'L' ... ';' wrapper. Returns nullopt for
// primitive types, primitive arrays, and anything not shaped like a class.
std::optional<std::string> normalize_class_descriptor(std::string_view descriptor);

// "Ljava/io/FileInputStream;->read([B)I" <-> MethodRef.
std::optional<MethodRef> parse_method_signature(std::string_view signature);
std::string format_method_signature(const MethodRef& ref);

// Invoke-list text format: '#' comments, blank lines, and data lines
// "<kind> <caller> <target>". An empty caller is written as '-'.
std::vector<InvokeSite> parse_invoke_list(std::istream& in);
std::vector<InvokeSite> load_invoke_list_text(const std::filesystem::path& path);
std::string format_invoke_list(std::span<const InvokeSite> sites);
void save_invoke_list_text(const std::filesystem::path& path, std::span<const InvokeSite> sites);

}  // namespace apiscan
