#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace apiscan {

// Random-access byte input for the zip reader.
class ByteSource {
 public:
  virtual ~ByteSource() = default;
  virtual std::uint64_t size() const = 0;
  // Fills `out` from `offset`; throws IoFailure on short reads.
  virtual void read(std::uint64_t offset, std::span<std::uint8_t> out) const = 0;
};

class FileSource final : public ByteSource {
 public:
  explicit FileSource(const std::filesystem::path& path);
  std::uint64_t size() const override { return size_; }
  void read(std::uint64_t offset, std::span<std::uint8_t> out) const override;

 private:
  std::filesystem::path path_;
  mutable std::ifstream in_;
  std::uint64_t size_ = 0;
};

class MemorySource final : public ByteSource {
 public:
  explicit MemorySource(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint64_t size() const override { return bytes_.size(); }
  void read(std::uint64_t offset, std::span<std::uint8_t> out) const override;

 private:
  std::span<const std::uint8_t> bytes_;
};

struct ApkPackage {
  std::filesystem::path path;
  // One buffer per classes*.dex entry: classes.dex, classes2.dex, classes3.dex, ...
  std::vector<std::vector<std::uint8_t>> dex_blobs;
  std::uint64_t total_size_bytes = 0;
};

// Multidex index of an archive entry name: 1 for "classes.dex", N for
// "classesN.dex" (N >= 2, no leading zero), nullopt otherwise.
std::optional<unsigned> dex_entry_index(std::string_view entry_name) noexcept;

// Reads the zip central directory and inflates only the DEX entries.
// Errors: NotAZipArchive, NoDexFound, IoFailure.
ApkPackage open_apk(const std::filesystem::path& path);
ApkPackage open_apk(const ByteSource& source, std::filesystem::path label = {});

}  // namespace apiscan
