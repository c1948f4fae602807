#include "apiscan/features.hpp"

#include <algorithm>
#include <fstream>

#include "apiscan/error.hpp"

namespace apiscan {

namespace {

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

FeatureVector extract_features(std::span<const InvokeSite> invokes, const ApiReferenceList& list) {
  FeatureVector fv;
  fv.counts.assign(list.size(), 0);
  fv.reference_fingerprint = list.fingerprint();
  const Granularity g = list.granularity();
  const bool descriptors = list.method_descriptors();
  for (const auto& site : invokes) {
    const auto key = key_of(site.target, g, descriptors);
    if (!key) continue;
    if (const auto idx = list.index_of(*key)) {
      auto& c = fv.counts[*idx];
      if (c < kCountCeiling) ++c;
    }
  }
  return fv;
}

void accumulate_features(const DexFile& dex, const ApiReferenceList& list, FeatureVector& fv) {
  if (fv.counts.size() != list.size() || fv.reference_fingerprint != list.fingerprint()) {
    throw Error(Errc::FingerprintMismatch, "feature vector belongs to another reference list");
  }
  const auto per_method = invoke_counts(dex);
  for (std::uint32_t m = 0; m < per_method.size(); ++m) {
    if (per_method[m] == 0) continue;
    const auto target = resolve_method(dex, m);
    if (!target) continue;
    const auto key = key_of(*target, list.granularity(), list.method_descriptors());
    if (!key) continue;
    if (const auto idx = list.index_of(*key)) {
      auto& c = fv.counts[*idx];
      c = static_cast<std::uint32_t>(std::min<std::uint64_t>(std::uint64_t{c} + per_method[m], kCountCeiling));
    }
  }
}

FeatureVector extract_features(const DexFile& dex, const ApiReferenceList& list) {
  FeatureVector fv{std::vector<std::uint32_t>(list.size(), 0), list.fingerprint()};
  accumulate_features(dex, list, fv);
  return fv;
}

FeatureVector extract_features(const ApkPackage& apk, const ApiReferenceList& list, const DexOptions& options) {
  FeatureVector fv{std::vector<std::uint32_t>(list.size(), 0), list.fingerprint()};
  for (const auto& blob : apk.dex_blobs) {
    accumulate_features(parse_dex(std::span<const std::uint8_t>(blob), options), list, fv);
  }
  return fv;
}

std::vector<InvokeSite> invokes_from_apk(const ApkPackage& apk, const DexOptions& options) {
  std::vector<InvokeSite> all;
  for (const auto& blob : apk.dex_blobs) {
    auto sites = extract_invokes(parse_dex(std::span<const std::uint8_t>(blob), options));
    all.insert(all.end(), std::make_move_iterator(sites.begin()),
               std::make_move_iterator(sites.end()));
  }
  return all;
}

std::vector<InvokeSite> load_sample_invokes(const std::filesystem::path& path,
                                            const DexOptions& options) {
  const auto ext = path.extension().string();
  if (ext == ".invokes" || ext == ".txt") return load_invoke_list_text(path);
  if (ext == ".dex") {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
    std::vector<std::uint8_t> blob((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    return extract_invokes(parse_dex(std::move(blob), options));
  }
  return invokes_from_apk(open_apk(path), options);
}

FeatureVector extract_from_apk(const std::filesystem::path& path, const ApiReferenceList& list,
                               const DexOptions& options) {
  return extract_features(open_apk(path), list, options);
}

void write_feature_csv(std::ostream& out, const ApiReferenceList& list,
                       std::span<const FeatureRow> rows) {
  out << "id,label";
  for (const auto& k : list.entries()) out << ',' << csv_field(k);
  out << '\n';
  for (const auto& row : rows) {
    if (row.features.reference_fingerprint != list.fingerprint()) {
      throw Error(Errc::FingerprintMismatch, "row '" + row.id + "' was extracted with another list");
    }
    out << csv_field(row.id) << ',' << label_name(row.label);
    for (auto c : row.features.counts) out << ',' << c;
    out << '\n';
  }
}

}  // namespace apiscan
