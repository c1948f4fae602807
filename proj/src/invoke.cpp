#include "apiscan/invoke.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include "apiscan/error.hpp"

namespace apiscan {

namespace {

constexpr std::array<std::string_view, 10> kTokens = {
    "invoke-virtual",       "invoke-super",       "invoke-direct",
    "invoke-static",        "invoke-interface",   "invoke-virtual/range",
    "invoke-super/range",   "invoke-direct/range", "invoke-static/range",
    "invoke-interface/range",
};

bool valid_class_path(std::string_view path) {
  if (path.empty() || path.front() == '/' || path.back() == '/') return false;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const char c = path[i];
    if (c == ';' || c == '[' || c == ' ' || c == '\t' || c == '(' || c == ')') return false;
    if (c == '/' && i + 1 < path.size() && path[i + 1] == '/') return false;
  }
  return true;
}

}  // namespace

std::uint8_t opcode_of(InvokeKind kind) noexcept {
  const auto k = static_cast<std::uint8_t>(kind);
  return k < 5 ? static_cast<std::uint8_t>(0x6e + k) : static_cast<std::uint8_t>(0x74 + (k - 5));
}

std::optional<InvokeKind> invoke_kind_from_opcode(std::uint8_t opcode) noexcept {
  if (opcode >= 0x6e && opcode <= 0x72) return static_cast<InvokeKind>(opcode - 0x6e);
  if (opcode >= 0x74 && opcode <= 0x78) return static_cast<InvokeKind>(5 + opcode - 0x74);
  return std::nullopt;
}

std::string_view kind_token(InvokeKind kind) noexcept {
  return kTokens[static_cast<std::size_t>(kind)];
}

std::optional<InvokeKind> parse_kind_token(std::string_view token) noexcept {
  for (std::size_t i = 0; i < kTokens.size(); ++i) {
    if (kTokens[i] == token) return static_cast<InvokeKind>(i);
  }
  return std::nullopt;
}

std::optional<std::string> normalize_class_descriptor(std::string_view descriptor) {
  while (!descriptor.empty() && descriptor.front() == '[') descriptor.remove_prefix(1);
  if (descriptor.size() < 3 || descriptor.front() != 'L' || descriptor.back() != ';') {
    return std::nullopt;
  }
  descriptor = descriptor.substr(1, descriptor.size() - 2);
  if (!valid_class_path(descriptor)) return std::nullopt;
  return std::string(descriptor);
}

std::optional<MethodRef> parse_method_signature(std::string_view signature) {
  const auto arrow = signature.find(";->");
  if (arrow == std::string_view::npos) return std::nullopt;
  auto cls = normalize_class_descriptor(signature.substr(0, arrow + 1));
  if (!cls) return std::nullopt;
  const auto rest = signature.substr(arrow + 3);
  const auto paren = rest.find('(');
  if (paren == std::string_view::npos || paren == 0) return std::nullopt;
  const auto close = rest.find(')', paren);
  if (close == std::string_view::npos || close + 1 >= rest.size()) return std::nullopt;
  MethodRef ref{std::move(*cls), std::string(rest.substr(0, paren)),
                std::string(rest.substr(paren))};
  for (char c : ref.name) {
    if (c == ' ' || c == '(' || c == ')' || c == ';' || c == '/') return std::nullopt;
  }
  for (char c : ref.descriptor) {
    if (c == ' ' || c == '\t') return std::nullopt;
  }
  return ref;
}

std::string format_method_signature(const MethodRef& ref) {
  std::string out;
  out.reserve(ref.class_path.size() + ref.name.size() + ref.descriptor.size() + 5);
  out += 'L';
  out += ref.class_path;
  out += ";->";
  out += ref.name;
  out += ref.descriptor;
  return out;
}

std::vector<InvokeSite> parse_invoke_list(std::istream& in) {
  std::vector<InvokeSite> sites;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    auto malformed = [&](const std::string& why) {
      return Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": " + why, line_no);
    };
    const auto sp1 = line.find(' ');
    const auto sp2 = sp1 == std::string::npos ? sp1 : line.find(' ', sp1 + 1);
    if (sp2 == std::string::npos || line.find(' ', sp2 + 1) != std::string::npos) {
      throw malformed("expected three space-separated fields");
    }
    const std::string_view view(line);
    const auto kind = parse_kind_token(view.substr(0, sp1));
    if (!kind) throw malformed("unknown invoke kind '" + line.substr(0, sp1) + "'");

    InvokeSite site;
    site.kind = *kind;
    const auto caller = view.substr(sp1 + 1, sp2 - sp1 - 1);
    if (caller != "-") {
      auto cls = normalize_class_descriptor(caller);
      if (!cls || caller.front() != 'L') throw malformed("bad caller descriptor");
      site.caller_class = std::move(*cls);
    }
    auto target = parse_method_signature(view.substr(sp2 + 1));
    if (!target) throw malformed("bad target signature");
    site.target = std::move(*target);
    sites.push_back(std::move(site));
  }
  return sites;
}

std::vector<InvokeSite> load_invoke_list_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  auto sites = parse_invoke_list(in);
  if (in.bad()) throw Error(Errc::IoFailure, "read error on " + path.string());
  return sites;
}

std::string format_invoke_list(std::span<const InvokeSite> sites) {
  std::string out;
  for (const auto& s : sites) {
    out += kind_token(s.kind);
    out += ' ';
    if (s.caller_class.empty()) {
      out += '-';
    } else {
      out += 'L';
      out += s.caller_class;
      out += ';';
    }
    out += ' ';
    out += format_method_signature(s.target);
    out += '\n';
  }
  return out;
}

void save_invoke_list_text(const std::filesystem::path& path, std::span<const InvokeSite> sites) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out << format_invoke_list(sites);
  if (!out) throw Error(Errc::IoFailure, "write error on " + path.string());
}

}  // namespace apiscan
