#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "apiscan/invoke.hpp"

namespace apiscan {

enum class Granularity : std::uint8_t { Package, Class, Method };

std::string_view granularity_name(Granularity g) noexcept;  // "package" | "class" | "method"
std::optional<Granularity> parse_granularity(std::string_view name) noexcept;

// Key shapes:
//   package  java/io                        segments of [a-z][a-z0-9_]*
//   class    java/io/FileInputStream        package segments + a final segment starting A-Z
//   method   java/io/FileInputStream;->read (optionally followed by a descriptor)
bool is_valid_key(std::string_view key, Granularity g, bool with_descriptor = false);

// Sorted, de-duplicated System-API vocabulary at one granularity. Feature
// index i always refers to entries()[i].
class ApiReferenceList {
 public:
  // Throws MalformedKey for keys that do not match the granularity.
  ApiReferenceList(Granularity granularity, std::vector<std::string> keys, int api_level = 25,
                   bool method_descriptors = false);

  Granularity granularity() const noexcept { return granularity_; }
  int api_level() const noexcept { return api_level_; }
  bool method_descriptors() const noexcept { return method_descriptors_; }
  std::span<const std::string> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::optional<std::size_t> index_of(std::string_view key) const;
  // Hex FNV-1a over granularity, descriptor mode, and entries.
  const std::string& fingerprint() const noexcept { return fingerprint_; }
  std::size_t duplicates_dropped() const noexcept { return duplicates_; }

 private:
  Granularity granularity_;
  int api_level_;
  bool method_descriptors_;
  std::vector<std::string> entries_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::string fingerprint_;
  std::size_t duplicates_ = 0;
};

// Reference-list text format: "# granularity: <g>", "# api-level: <n>",
// optional "# method-descriptors: yes", then one key per line.
// Errors: GranularityMismatch, MalformedKey(line), IoFailure.
ApiReferenceList parse_reference(std::istream& in, Granularity expected);
ApiReferenceList load_reference(const std::filesystem::path& path, Granularity expected);
std::string format_reference(const ApiReferenceList& list);

// Feature key of `target` at granularity `g`. Method keys exclude the
// descriptor unless `with_descriptor`. nullopt when the class path is empty.
std::optional<std::string> key_of(const MethodRef& target, Granularity g,
                                  bool with_descriptor = false);

// Maps each key to its coarser key. InvalidProjection unless `to` is coarser.
ApiReferenceList project(const ApiReferenceList& list, Granularity to);

}  // namespace apiscan
