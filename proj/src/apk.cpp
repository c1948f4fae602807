#include "apiscan/apk.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <limits>

#include "apiscan/binary.hpp"
#include "apiscan/error.hpp"

namespace apiscan {

namespace {

constexpr std::uint32_t kEocdSignature = 0x06054b50;
constexpr std::uint32_t kCentralSignature = 0x02014b50;
constexpr std::uint32_t kLocalSignature = 0x04034b50;
constexpr std::size_t kEocdSize = 22;
constexpr std::size_t kCentralHeaderSize = 46;
constexpr std::size_t kLocalHeaderSize = 30;
constexpr std::size_t kMaxComment = 0xffff;

struct CentralEntry {
  std::string name;
  std::uint16_t flags;
  std::uint16_t method;
  std::uint32_t crc;
  std::uint32_t compressed_size;
  std::uint32_t uncompressed_size;
  std::uint32_t local_header_offset;
};

struct EndOfCentralDirectory {
  std::uint16_t entries;
  std::uint32_t cd_size;
  std::uint32_t cd_offset;
};

[[noreturn]] void not_zip(const std::string& why) { throw Error(Errc::NotAZipArchive, why); }

std::vector<std::uint8_t> read_range(const ByteSource& src, std::uint64_t offset, std::uint64_t len) {
  if (offset > src.size() || src.size() - offset < len) {
    not_zip("range [" + std::to_string(offset) + ", +" + std::to_string(len) +
            ") lies outside the archive");
  }
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(len));
  src.read(offset, buf);
  return buf;
}

// Scans backwards in growing windows so that archives without a trailing
// comment only touch their final 22 bytes.
EndOfCentralDirectory find_eocd(const ByteSource& src) {
  const std::uint64_t size = src.size();
  if (size < kEocdSize) not_zip("file too small for an end-of-central-directory record");
  const std::uint64_t max_window = std::min<std::uint64_t>(size, kEocdSize + kMaxComment);
  std::uint64_t window = kEocdSize;
  while (true) {
    const auto tail = read_range(src, size - window, window);
    const ByteSpan bytes(tail);
    for (std::size_t pos = window - kEocdSize + 1; pos-- > 0;) {
      if (read_u32(bytes, pos) != kEocdSignature) continue;
      const std::uint16_t comment_len = read_u16(bytes, pos + 20);
      if (pos + kEocdSize + comment_len != window) continue;
      const std::uint16_t disk = read_u16(bytes, pos + 4);
      const std::uint16_t cd_disk = read_u16(bytes, pos + 6);
      const std::uint16_t on_disk = read_u16(bytes, pos + 8);
      EndOfCentralDirectory eocd{read_u16(bytes, pos + 10), read_u32(bytes, pos + 12),
                                 read_u32(bytes, pos + 16)};
      if (disk != 0 || cd_disk != 0 || on_disk != eocd.entries) {
        not_zip("multi-disk archives are not supported");
      }
      if (eocd.entries == 0xffff || eocd.cd_offset == 0xffffffff || eocd.cd_size == 0xffffffff) {
        not_zip("zip64 archives are not supported");
      }
      const std::uint64_t eocd_pos = size - window + pos;
      if (static_cast<std::uint64_t>(eocd.cd_offset) + eocd.cd_size > eocd_pos) {
        not_zip("central directory overlaps end record");
      }
      return eocd;
    }
    if (window == max_window) break;
    window = std::min(max_window, window * 2 + 64);
  }
  not_zip("end-of-central-directory signature not found");
}

std::vector<CentralEntry> read_central_directory(const ByteSource& src,
                                                 const EndOfCentralDirectory& eocd) {
  const auto cd = read_range(src, eocd.cd_offset, eocd.cd_size);
  const ByteSpan bytes(cd);
  std::vector<CentralEntry> entries;
  entries.reserve(eocd.entries);
  std::size_t pos = 0;
  for (std::uint16_t i = 0; i < eocd.entries; ++i) {
    if (cd.size() - pos < kCentralHeaderSize) not_zip("truncated central directory");
    if (read_u32(bytes, pos) != kCentralSignature) not_zip("bad central directory signature");
    CentralEntry e;
    e.flags = read_u16(bytes, pos + 8);
    e.method = read_u16(bytes, pos + 10);
    e.crc = read_u32(bytes, pos + 16);
    e.compressed_size = read_u32(bytes, pos + 20);
    e.uncompressed_size = read_u32(bytes, pos + 24);
    const std::uint16_t name_len = read_u16(bytes, pos + 28);
    const std::uint16_t extra_len = read_u16(bytes, pos + 30);
    const std::uint16_t comment_len = read_u16(bytes, pos + 32);
    e.local_header_offset = read_u32(bytes, pos + 42);
    const std::size_t record = kCentralHeaderSize + name_len + extra_len + comment_len;
    if (cd.size() - pos < record) not_zip("truncated central directory entry");
    e.name.assign(reinterpret_cast<const char*>(cd.data() + pos + kCentralHeaderSize), name_len);
    entries.push_back(std::move(e));
    pos += record;
  }
  if (pos != cd.size()) not_zip("central directory size disagrees with its entries");
  return entries;
}

std::vector<std::uint8_t> inflate_raw(std::span<const std::uint8_t> input, std::size_t expected,
                                      const std::string& name) {
  std::vector<std::uint8_t> out(expected);
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw Error(Errc::IoFailure, "zlib init failed");
  zs.next_in = const_cast<Bytef*>(input.data());
  zs.avail_in = static_cast<uInt>(input.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected) {
    not_zip("deflate stream of '" + name + "' is corrupt");
  }
  return out;
}

std::vector<std::uint8_t> read_entry(const ByteSource& src, const CentralEntry& e) {
  if (e.flags & 0x1) not_zip("encrypted entry '" + e.name + "'");
  const auto local = read_range(src, e.local_header_offset, kLocalHeaderSize);
  const ByteSpan lh(local);
  if (read_u32(lh, 0) != kLocalSignature) not_zip("bad local header for '" + e.name + "'");
  const std::uint64_t data_off = static_cast<std::uint64_t>(e.local_header_offset) +
                                 kLocalHeaderSize + read_u16(lh, 26) + read_u16(lh, 28);
  // Sizes come from the central directory; local sizes may be zero when a
  // data descriptor follows the payload.
  auto payload = read_range(src, data_off, e.compressed_size);
  std::vector<std::uint8_t> data;
  switch (e.method) {
    case 0:
      if (e.compressed_size != e.uncompressed_size) not_zip("stored size mismatch in '" + e.name + "'");
      data = std::move(payload);
      break;
    case 8:
      data = inflate_raw(payload, e.uncompressed_size, e.name);
      break;
    default:
      not_zip("unsupported compression method " + std::to_string(e.method) + " for '" + e.name + "'");
  }
  const uLong crc = crc32(crc32(0L, Z_NULL, 0), data.data(), static_cast<uInt>(data.size()));
  if (crc != e.crc) not_zip("CRC mismatch in '" + e.name + "'");
  return data;
}

}  // namespace

FileSource::FileSource(const std::filesystem::path& path) : path_(path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(Errc::IoFailure, "not a readable file: " + path.string());
  }
  size_ = std::filesystem::file_size(path, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot stat " + path.string());
  in_.open(path, std::ios::binary);
  if (!in_) throw Error(Errc::IoFailure, "cannot open " + path.string());
}

void FileSource::read(std::uint64_t offset, std::span<std::uint8_t> out) const {
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(offset));
  in_.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (static_cast<std::size_t>(in_.gcount()) != out.size()) {
    throw Error(Errc::IoFailure, "short read from " + path_.string());
  }
}

void MemorySource::read(std::uint64_t offset, std::span<std::uint8_t> out) const {
  if (offset > bytes_.size() || bytes_.size() - offset < out.size()) {
    throw Error(Errc::IoFailure, "read past end of memory buffer");
  }
  std::copy_n(bytes_.begin() + static_cast<std::ptrdiff_t>(offset), out.size(), out.begin());
}

std::optional<unsigned> dex_entry_index(std::string_view name) noexcept {
  constexpr std::string_view prefix = "classes";
  constexpr std::string_view suffix = ".dex";
  if (name.size() < prefix.size() + suffix.size() || !name.starts_with(prefix) ||
      !name.ends_with(suffix)) {
    return std::nullopt;
  }
  const auto digits = name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
  if (digits.empty()) return 1u;
  if (digits.front() == '0') return std::nullopt;
  unsigned n = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || n < 2) return std::nullopt;
  return n;
}

ApkPackage open_apk(const ByteSource& source, std::filesystem::path label) {
  const auto eocd = find_eocd(source);
  const auto entries = read_central_directory(source, eocd);

  std::vector<std::pair<unsigned, const CentralEntry*>> dex_entries;
  for (const auto& e : entries) {
    if (auto idx = dex_entry_index(e.name)) dex_entries.emplace_back(*idx, &e);
  }
  if (dex_entries.empty()) {
    throw Error(Errc::NoDexFound, "no classes*.dex entry in " + label.string());
  }
  std::sort(dex_entries.begin(), dex_entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < dex_entries.size(); ++i) {
    if (dex_entries[i].first == dex_entries[i - 1].first) {
      not_zip("duplicate entry '" + dex_entries[i].second->name + "'");
    }
  }

  ApkPackage pkg;
  pkg.path = std::move(label);
  pkg.total_size_bytes = source.size();
  for (const auto& [idx, entry] : dex_entries) pkg.dex_blobs.push_back(read_entry(source, *entry));
  return pkg;
}

ApkPackage open_apk(const std::filesystem::path& path) {
  FileSource src(path);
  return open_apk(src, path);
}

}  // namespace apiscan
