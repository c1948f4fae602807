#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "apiscan/invoke.hpp"

namespace apiscan {

// Invoke-level stand-ins for commercial protector strategies. They model the
// feature-level footprint only; no DEX bytes are rewritten.
enum class ObfuscationKind : std::uint8_t {
  Identity,
  StringEncryption,    // + k calls into an app-private decryptor; System-API counts unchanged
  ResourceEncryption,  // + a fixed System-API stub (crypto, io)
  ClassEncryption,     // app code removed; a fixed loader stub remains
};

std::string_view obfuscation_name(ObfuscationKind kind) noexcept;  // "string-encryption", ...
std::optional<ObfuscationKind> parse_obfuscation(std::string_view name) noexcept;

struct ObfuscationTransform {
  ObfuscationKind kind = ObfuscationKind::Identity;
  // Injected sites, identical for every sample of a kind.
  std::vector<InvokeSite> stub_profile;
  std::uint64_t seed = 0;
};

// Stub profile files live in `stub_dir` as "<kind-name>.invokes".
ObfuscationTransform load_transform(ObfuscationKind kind, const std::filesystem::path& stub_dir,
                                    std::uint64_t seed = 0);

// Callers in these namespaces belong to the platform or bundled support
// libraries, not to the app, and survive class encryption.
bool is_framework_class(std::string_view class_path) noexcept;

std::vector<InvokeSite> transform(std::span<const InvokeSite> invokes, const ObfuscationTransform& t);

}  // namespace apiscan
