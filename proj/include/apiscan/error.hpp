#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace apiscan {

// Every failure the library reports carries one of these codes.
enum class Errc {
  IoFailure,
  NotAZipArchive,
  NoDexFound,
  MalformedLine,
  TruncatedEncoding,
  Overlong,
  InvalidSequence,
  BadMagic,
  UnsupportedVersion,
  ChecksumMismatch,
  StructuralError,
  GranularityMismatch,
  MalformedKey,
  InvalidProjection,
  EmptySet,
  NoUsefulSplit,
  SingleClassData,
  InvalidHyperparams,
  TooFewSamples,
  FingerprintMismatch,
  CorruptModel,
  VersionMismatch,
  MissingClass,
  EmptyBin,
  ConfigError,
  UsageError,
  DuplicateId,
};

constexpr std::string_view errc_name(Errc c) {
  switch (c) {
    case Errc::IoFailure: return "IoFailure";
    case Errc::NotAZipArchive: return "NotAZipArchive";
    case Errc::NoDexFound: return "NoDexFound";
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::TruncatedEncoding: return "TruncatedEncoding";
    case Errc::Overlong: return "Overlong";
    case Errc::InvalidSequence: return "InvalidSequence";
    case Errc::BadMagic: return "BadMagic";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::StructuralError: return "StructuralError";
    case Errc::GranularityMismatch: return "GranularityMismatch";
    case Errc::MalformedKey: return "MalformedKey";
    case Errc::InvalidProjection: return "InvalidProjection";
    case Errc::EmptySet: return "EmptySet";
    case Errc::NoUsefulSplit: return "NoUsefulSplit";
    case Errc::SingleClassData: return "SingleClassData";
    case Errc::InvalidHyperparams: return "InvalidHyperparams";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::FingerprintMismatch: return "FingerprintMismatch";
    case Errc::CorruptModel: return "CorruptModel";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::MissingClass: return "MissingClass";
    case Errc::EmptyBin: return "EmptyBin";
    case Errc::ConfigError: return "ConfigError";
    case Errc::UsageError: return "UsageError";
    case Errc::DuplicateId: return "DuplicateId";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail, std::size_t line = 0)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail),
        code_(code),
        line_(line) {}

  Errc code() const noexcept { return code_; }

  // 1-based line number for text-format errors, 0 otherwise.
  std::size_t line() const noexcept { return line_; }

 private:
  Errc code_;
  std::size_t line_;
};

}  // namespace apiscan
