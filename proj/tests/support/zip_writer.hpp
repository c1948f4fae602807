#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace apiscan::testkit {

struct ZipEntry {
  std::string name;
  std::vector<std::uint8_t> data;
  bool deflate = true;
};

// Single-disk archive, no zip64. `comment` lands in the end record.
std::vector<std::uint8_t> make_zip(std::span<const ZipEntry> entries, std::string_view comment = {});

// classes.dex, classes2.dex, ... plus a manifest and a resource blob.
std::vector<std::uint8_t> make_apk(std::span<const std::vector<std::uint8_t>> dex_files, bool deflate = true);

}  // namespace apiscan::testkit
