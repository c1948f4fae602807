#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "apiscan/invoke.hpp"
#include "apiscan/random.hpp"

namespace apiscan::testkit {

// UTF-8 -> modified UTF-8 (NUL as C0 80, supplementary characters as two
// three-byte surrogates). No terminator.
std::vector<std::uint8_t> encode_mutf8(std::string_view utf8);
std::size_t utf16_length(std::string_view utf8);

// Instruction width from the Dalvik format id of each opcode ("35c" -> 3).
// Kept separate from the library table on purpose.
std::size_t format_width(std::uint8_t opcode);

struct MethodBody {
  std::uint32_t method_idx = 0;
  std::uint32_t access_flags = 0x1;
  std::optional<std::vector<std::uint16_t>> code;  // nullopt: abstract
  std::uint16_t registers = 8;
};

struct ClassSpec {
  std::string descriptor;
  std::string superclass = "Ljava/lang/Object;";
  std::vector<MethodBody> direct;
  std::vector<MethodBody> virtual_methods;
  bool class_data = true;
};

struct MethodSig {
  std::string class_descriptor;
  std::string name;
  std::string proto;
};

// Writes DEX files with tables in insertion order.
class DexBuilder {
 public:
  std::uint32_t string_id(std::string_view s);
  std::uint32_t type_id(std::string_view descriptor);
  std::uint32_t proto_id(std::string_view descriptor);  // "(Ljava/lang/String;I)Z"
  std::uint32_t method_id(std::string_view class_descriptor, std::string_view name, std::string_view proto);
  std::uint32_t method_id(const MethodRef& ref);
  const MethodSig& method(std::uint32_t idx) const { return methods_[idx]; }
  std::size_t method_count() const { return methods_.size(); }

  void add_class(ClassSpec spec) { classes_.push_back(std::move(spec)); }

  std::vector<std::uint8_t> build(int version = 35) const;

 private:
  struct Proto {
    std::uint32_t shorty;
    std::uint32_t ret;
    std::vector<std::uint32_t> params;
  };
  std::vector<std::string> strings_;
  std::map<std::string, std::uint32_t, std::less<>> string_index_;
  std::vector<std::uint32_t> types_;
  std::map<std::string, std::uint32_t, std::less<>> type_index_;
  std::vector<Proto> protos_;
  std::map<std::string, std::uint32_t, std::less<>> proto_index_;
  std::vector<MethodSig> methods_;
  std::vector<std::array<std::uint32_t, 3>> method_ids_;
  std::map<std::string, std::uint32_t, std::less<>> method_index_;
  std::vector<ClassSpec> classes_;
};

// Splits a descriptor list "Ljava/lang/String;I[B" into single types.
std::vector<std::string> split_types(std::string_view list);

// Class path an invoke on `class_descriptor` is counted under, computed the
// plain way: drop '[' prefixes, keep L...; bodies, drop primitives.
std::optional<std::string> oracle_class_path(std::string_view class_descriptor);

struct CodeGenOptions {
  std::size_t instructions = 40;
  double invoke_share = 0.3;
  double payload_share = 0.04;
  double exotic_invoke_share = 0.03;  // invoke-polymorphic / invoke-custom
};

struct GeneratedCode {
  std::vector<std::uint16_t> insns;
  std::vector<std::pair<InvokeKind, std::uint32_t>> invokes;  // counted invokes, in order
};

// Random instruction stream over `callable` method indices.
GeneratedCode random_code(Rng& rng, const std::vector<std::uint32_t>& callable, const CodeGenOptions& opts);

// Encodes one invoke instruction.
std::vector<std::uint16_t> encode_invoke(InvokeKind kind, std::uint32_t method_idx, Rng& rng);

struct RandomDex {
  std::vector<std::uint8_t> bytes;
  std::vector<InvokeSite> expected;  // ground truth, in emission order
};

struct RandomDexOptions {
  std::size_t classes = 6;
  std::size_t extra_methods = 30;
  std::size_t methods_per_class = 4;
  CodeGenOptions code;
  int version = 35;
};

RandomDex random_dex(std::uint64_t seed, const RandomDexOptions& opts = {});

// One class per distinct caller, each with a single method whose body holds
// that caller's invokes (plus filler), so extract_invokes returns exactly
// `sites` up to order.
std::vector<std::uint8_t> dex_from_invokes(const std::vector<InvokeSite>& sites, std::uint64_t filler_seed = 0);

std::string class_descriptor_of(std::string_view class_path);

}  // namespace apiscan::testkit
