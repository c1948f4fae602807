#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "apiscan/features.hpp"
#include "apiscan/label.hpp"

namespace apiscan {

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  auto operator<=>(const Date&) const = default;
  bool operator==(const Date&) const = default;

  // Strict ISO-8601 calendar date, "YYYY-MM-DD".
  static std::optional<Date> parse(std::string_view iso);
  std::string iso() const;
};

struct Sample {
  std::string id;
  std::vector<std::uint32_t> counts;
  Label label = Label::Trusted;
  Date first_seen;
  std::string family;
};

// Samples sharing one reference list. Ids are unique.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(std::string reference_fingerprint, std::size_t dimension)
      : fingerprint_(std::move(reference_fingerprint)), dimension_(dimension) {}

  // Errors: FingerprintMismatch, DuplicateId.
  void add(std::string id, const FeatureVector& features, Label label, Date first_seen = {},
           std::string family = {});
  void add(Sample sample);

  const std::vector<Sample>& samples() const noexcept { return samples_; }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  std::size_t dimension() const noexcept { return dimension_; }
  const std::string& reference_fingerprint() const noexcept { return fingerprint_; }

  std::array<std::size_t, kNumClasses> class_counts() const;
  FeatureVector features_of(std::size_t i) const { return {samples_[i].counts, fingerprint_}; }
  LabeledDataset subset(std::span<const std::size_t> indices) const;
  bool contains(std::string_view id) const { return ids_.contains(std::string(id)); }

 private:
  std::string fingerprint_;
  std::size_t dimension_ = 0;
  std::vector<Sample> samples_;
  std::unordered_set<std::string> ids_;
};

// A sample kept at the invoke-list level, before feature extraction.
struct InvokeSample {
  std::string id;
  Label label = Label::Trusted;
  Date first_seen;
  std::string family;
  std::vector<InvokeSite> invokes;
};

LabeledDataset to_dataset(std::span<const InvokeSample> corpus, const ApiReferenceList& list);

// Manifest CSV: "path,label,first_seen,family" with a header row. Relative
// paths are resolved against the manifest's directory.
struct ManifestRow {
  std::string id;  // path text as written
  std::filesystem::path path;
  Label label = Label::Trusted;
  Date first_seen;
  std::string family;
  std::size_t line = 0;
};

std::vector<ManifestRow> load_manifest(const std::filesystem::path& manifest);

struct LoadFailure {
  std::filesystem::path path;
  std::string message;
};

struct LoadedCorpus {
  std::vector<InvokeSample> samples;
  std::vector<LoadFailure> failures;
};

// Extracts every row's invoke list; rows that fail to parse are collected in
// `failures` and skipped.
LoadedCorpus load_corpus(std::span<const ManifestRow> rows, const DexOptions& options = {});

}  // namespace apiscan
