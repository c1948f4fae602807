#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "apiscan/apk.hpp"
#include "apiscan/dex.hpp"
#include "apiscan/invoke.hpp"
#include "apiscan/label.hpp"
#include "apiscan/reference.hpp"

namespace apiscan {

// Counts never wrap; they stop here.
inline constexpr std::uint32_t kCountCeiling = 0x7fffffff;

struct FeatureVector {
  std::vector<std::uint32_t> counts;  // aligned with the reference entries
  std::string reference_fingerprint;

  bool operator==(const FeatureVector&) const = default;
};

// counts[i] = number of sites whose key at the list's granularity is entry i.
FeatureVector extract_features(std::span<const InvokeSite> invokes, const ApiReferenceList& list);

// Same counts as extract_features(extract_invokes(dex), list), computed per
// method index so each distinct target is keyed once.
FeatureVector extract_features(const DexFile& dex, const ApiReferenceList& list);
FeatureVector extract_features(const ApkPackage& apk, const ApiReferenceList& list,
                               const DexOptions& options = {});
// Adds dex's counts into fv, saturating at kCountCeiling.
void accumulate_features(const DexFile& dex, const ApiReferenceList& list, FeatureVector& fv);

// Invokes of every dex blob, concatenated in multidex order.
std::vector<InvokeSite> invokes_from_apk(const ApkPackage& apk, const DexOptions& options = {});

// Invoke list of one sample file, chosen by extension: ".dex" raw DEX,
// ".invokes"/".txt" invoke-list text, anything else an application package.
std::vector<InvokeSite> load_sample_invokes(const std::filesystem::path& path,
                                            const DexOptions& options = {});

FeatureVector extract_from_apk(const std::filesystem::path& path, const ApiReferenceList& list,
                               const DexOptions& options = {});

struct FeatureRow {
  std::string id;
  Label label;
  FeatureVector features;
};

// Header "id,label,<key>,<key>,..." then one row per sample.
void write_feature_csv(std::ostream& out, const ApiReferenceList& list,
                       std::span<const FeatureRow> rows);

}  // namespace apiscan
