#include "apiscan/reference.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "apiscan/error.hpp"
#include "apiscan/hash.hpp"

namespace apiscan {

namespace {

bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool valid_package(std::string_view p) {
  if (p.empty()) return false;
  std::size_t start = 0;
  while (true) {
    const auto slash = p.find('/', start);
    const auto seg = p.substr(start, slash == std::string_view::npos ? p.npos : slash - start);
    if (seg.empty() || !is_lower(seg.front())) return false;
    for (char c : seg) {
      if (!is_lower(c) && !is_digit(c) && c != '_') return false;
    }
    if (slash == std::string_view::npos) return true;
    start = slash + 1;
  }
}

bool valid_class(std::string_view c) {
  const auto slash = c.rfind('/');
  const auto simple = slash == std::string_view::npos ? c : c.substr(slash + 1);
  if (slash != std::string_view::npos && !valid_package(c.substr(0, slash))) return false;
  if (simple.empty() || !is_upper(simple.front())) return false;
  for (char ch : simple) {
    if (!is_lower(ch) && !is_upper(ch) && !is_digit(ch) && ch != '_' && ch != '$') return false;
  }
  return true;
}

bool valid_method_name(std::string_view n) {
  if (n.empty()) return false;
  for (char c : n) {
    if (c == ' ' || c == ';' || c == '/' || c == '(' || c == ')' || c == '[' || c == '\t') {
      return false;
    }
  }
  return true;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Coarser key of a valid key; the input granularity is known by the caller.
std::string coarsen(std::string_view key, Granularity from, Granularity to) {
  std::string_view cls = key;
  if (from == Granularity::Method) cls = key.substr(0, key.find(";->"));
  if (to == Granularity::Class) return std::string(cls);
  const auto slash = cls.rfind('/');
  return slash == std::string_view::npos ? std::string{} : std::string(cls.substr(0, slash));
}

}  // namespace

std::string_view granularity_name(Granularity g) noexcept {
  switch (g) {
    case Granularity::Package: return "package";
    case Granularity::Class: return "class";
    case Granularity::Method: return "method";
  }
  return "unknown";
}

std::optional<Granularity> parse_granularity(std::string_view name) noexcept {
  if (name == "package") return Granularity::Package;
  if (name == "class") return Granularity::Class;
  if (name == "method") return Granularity::Method;
  return std::nullopt;
}

bool is_valid_key(std::string_view key, Granularity g, bool with_descriptor) {
  switch (g) {
    case Granularity::Package:
      return valid_package(key);
    case Granularity::Class:
      return valid_class(key);
    case Granularity::Method: {
      const auto arrow = key.find(";->");
      if (arrow == std::string_view::npos || !valid_class(key.substr(0, arrow))) return false;
      auto rest = key.substr(arrow + 3);
      if (with_descriptor) {
        const auto paren = rest.find('(');
        if (paren == std::string_view::npos) return false;
        const auto desc = rest.substr(paren);
        const auto close = desc.find(')');
        if (close == std::string_view::npos || close + 1 >= desc.size()) return false;
        rest = rest.substr(0, paren);
      }
      return valid_method_name(rest);
    }
  }
  return false;
}

ApiReferenceList::ApiReferenceList(Granularity granularity, std::vector<std::string> keys,
                                   int api_level, bool method_descriptors)
    : granularity_(granularity),
      api_level_(api_level),
      method_descriptors_(method_descriptors && granularity == Granularity::Method),
      entries_(std::move(keys)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!is_valid_key(entries_[i], granularity_, method_descriptors_)) {
      throw Error(Errc::MalformedKey, "'" + entries_[i] + "' is not a " +
                                          std::string(granularity_name(granularity_)) + " key");
    }
  }
  std::sort(entries_.begin(), entries_.end());
  const auto before = entries_.size();
  entries_.erase(std::unique(entries_.begin(), entries_.end()), entries_.end());
  duplicates_ = before - entries_.size();

  index_.reserve(entries_.size());
  std::uint64_t h = fnv1a64(granularity_name(granularity_));
  h = fnv1a64(method_descriptors_ ? "+descriptors\n" : "\n", h);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    index_.emplace(entries_[i], static_cast<std::uint32_t>(i));
    h = fnv1a64(entries_[i], h);
    h = fnv1a64("\n", h);
  }
  fingerprint_ = to_hex(h);
}

std::optional<std::size_t> ApiReferenceList::index_of(std::string_view key) const {
  const auto it = index_.find(std::string(key));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

ApiReferenceList parse_reference(std::istream& in, Granularity expected) {
  std::optional<Granularity> declared;
  int api_level = 25;
  bool descriptors = false;
  std::vector<std::string> keys;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty()) continue;
    if (text.front() == '#') {
      const auto body = trim(text.substr(1));
      const auto colon = body.find(':');
      if (colon == std::string_view::npos) continue;
      const auto name = trim(body.substr(0, colon));
      const auto value = trim(body.substr(colon + 1));
      if (name == "granularity") {
        declared = parse_granularity(value);
        if (!declared) {
          throw Error(Errc::GranularityMismatch, "unknown granularity '" + std::string(value) + "'",
                      line_no);
        }
      } else if (name == "api-level") {
        const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), api_level);
        if (ec != std::errc{} || p != value.data() + value.size()) {
          throw Error(Errc::MalformedKey, "bad api-level on line " + std::to_string(line_no), line_no);
        }
      } else if (name == "method-descriptors") {
        descriptors = value == "yes" || value == "true";
      }
      continue;
    }
    if (!declared) {
      throw Error(Errc::GranularityMismatch, "key before '# granularity:' header", line_no);
    }
    if (!is_valid_key(text, *declared, descriptors)) {
      throw Error(Errc::MalformedKey,
                  "line " + std::to_string(line_no) + ": '" + std::string(text) + "'", line_no);
    }
    keys.emplace_back(text);
  }
  if (!declared) throw Error(Errc::GranularityMismatch, "missing '# granularity:' header");
  if (*declared != expected) {
    throw Error(Errc::GranularityMismatch, "file declares " +
                                               std::string(granularity_name(*declared)) +
                                               ", expected " +
                                               std::string(granularity_name(expected)));
  }
  return ApiReferenceList(*declared, std::move(keys), api_level, descriptors);
}

ApiReferenceList load_reference(const std::filesystem::path& path, Granularity expected) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  return parse_reference(in, expected);
}

std::string format_reference(const ApiReferenceList& list) {
  std::ostringstream out;
  out << "# granularity: " << granularity_name(list.granularity()) << '\n';
  out << "# api-level: " << list.api_level() << '\n';
  if (list.method_descriptors()) out << "# method-descriptors: yes\n";
  for (const auto& k : list.entries()) out << k << '\n';
  return out.str();
}

std::optional<std::string> key_of(const MethodRef& target, Granularity g, bool with_descriptor) {
  if (target.class_path.empty()) return std::nullopt;
  switch (g) {
    case Granularity::Package:
      return std::string(target.package());
    case Granularity::Class:
      return target.class_path;
    case Granularity::Method: {
      std::string key;
      key.reserve(target.class_path.size() + target.name.size() + 3 +
                  (with_descriptor ? target.descriptor.size() : 0));
      key += target.class_path;
      key += ";->";
      key += target.name;
      if (with_descriptor) key += target.descriptor;
      return key;
    }
  }
  return std::nullopt;
}

ApiReferenceList project(const ApiReferenceList& list, Granularity to) {
  if (static_cast<int>(to) >= static_cast<int>(list.granularity())) {
    throw Error(Errc::InvalidProjection,
                std::string(granularity_name(list.granularity())) + " -> " +
                    std::string(granularity_name(to)) + " is not a coarsening");
  }
  std::vector<std::string> keys;
  keys.reserve(list.size());
  for (const auto& k : list.entries()) {
    auto coarse = coarsen(k, list.granularity(), to);
    // Default-package classes have no package key.
    if (!coarse.empty()) keys.push_back(std::move(coarse));
  }
  return ApiReferenceList(to, std::move(keys), list.api_level());
}

}  // namespace apiscan
