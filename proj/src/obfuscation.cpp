#include "apiscan/obfuscation.hpp"

#include <array>

#include "apiscan/error.hpp"
#include "apiscan/hash.hpp"
#include "apiscan/random.hpp"

namespace apiscan {

namespace {

std::uint64_t content_hash(std::span<const InvokeSite> invokes) {
  std::uint64_t h = fnv1a64(std::to_string(invokes.size()));
  for (const auto& s : invokes) {
    h = fnv1a64(s.target.class_path, h);
    h = fnv1a64(s.target.name, h);
  }
  return h;
}

}  // namespace

std::string_view obfuscation_name(ObfuscationKind kind) noexcept {
  switch (kind) {
    case ObfuscationKind::Identity: return "identity";
    case ObfuscationKind::StringEncryption: return "string-encryption";
    case ObfuscationKind::ResourceEncryption: return "resource-encryption";
    case ObfuscationKind::ClassEncryption: return "class-encryption";
  }
  return "unknown";
}

std::optional<ObfuscationKind> parse_obfuscation(std::string_view name) noexcept {
  for (auto k : {ObfuscationKind::Identity, ObfuscationKind::StringEncryption,
                 ObfuscationKind::ResourceEncryption, ObfuscationKind::ClassEncryption}) {
    if (obfuscation_name(k) == name) return k;
  }
  if (name == "string") return ObfuscationKind::StringEncryption;
  if (name == "resource") return ObfuscationKind::ResourceEncryption;
  if (name == "class") return ObfuscationKind::ClassEncryption;
  return std::nullopt;
}

ObfuscationTransform load_transform(ObfuscationKind kind, const std::filesystem::path& stub_dir,
                                    std::uint64_t seed) {
  ObfuscationTransform t{kind, {}, seed};
  if (kind == ObfuscationKind::Identity) return t;
  t.stub_profile = load_invoke_list_text(stub_dir / (std::string(obfuscation_name(kind)) + ".invokes"));
  if (t.stub_profile.empty()) {
    throw Error(Errc::ConfigError, "empty stub profile for " + std::string(obfuscation_name(kind)));
  }
  return t;
}

bool is_framework_class(std::string_view class_path) noexcept {
  static constexpr std::array<std::string_view, 7> prefixes = {
      "android/", "androidx/", "java/", "javax/", "dalvik/", "kotlin/", "org/apache/"};
  for (auto p : prefixes) {
    if (class_path.starts_with(p)) return true;
  }
  return false;
}

std::vector<InvokeSite> transform(std::span<const InvokeSite> invokes, const ObfuscationTransform& t) {
  std::vector<InvokeSite> out;
  switch (t.kind) {
    case ObfuscationKind::Identity:
      out.assign(invokes.begin(), invokes.end());
      break;
    case ObfuscationKind::StringEncryption: {
      out.assign(invokes.begin(), invokes.end());
      if (t.stub_profile.empty()) break;
      Rng rng(t.seed ^ content_hash(invokes));
      const std::size_t k = 1 + static_cast<std::size_t>(rng.below(5));
      for (std::size_t i = 0; i < k; ++i) out.push_back(t.stub_profile[i % t.stub_profile.size()]);
      break;
    }
    case ObfuscationKind::ResourceEncryption:
      out.assign(invokes.begin(), invokes.end());
      out.insert(out.end(), t.stub_profile.begin(), t.stub_profile.end());
      break;
    case ObfuscationKind::ClassEncryption:
      for (const auto& s : invokes) {
        if (is_framework_class(s.caller_class)) out.push_back(s);
      }
      out.insert(out.end(), t.stub_profile.begin(), t.stub_profile.end());
      break;
  }
  return out;
}

}  // namespace apiscan
