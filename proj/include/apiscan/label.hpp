#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace apiscan {

// Fixed class order; probability vectors and tie-breaking follow it.
enum class Label : std::uint8_t { Trusted = 0, GenericMalware = 1, Ransomware = 2 };

inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::array<Label, kNumClasses> kClassOrder = {Label::Trusted, Label::GenericMalware,
                                                               Label::Ransomware};

constexpr std::size_t class_index(Label l) noexcept { return static_cast<std::size_t>(l); }

// Manifest spelling: trusted | malware | ransomware.
constexpr std::string_view label_name(Label l) noexcept {
  switch (l) {
    case Label::Trusted: return "trusted";
    case Label::GenericMalware: return "malware";
    case Label::Ransomware: return "ransomware";
  }
  return "unknown";
}

constexpr std::optional<Label> parse_label(std::string_view s) noexcept {
  if (s == "trusted") return Label::Trusted;
  if (s == "malware") return Label::GenericMalware;
  if (s == "ransomware") return Label::Ransomware;
  return std::nullopt;
}

}  // namespace apiscan
