#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "apiscan/reference.hpp"

namespace apiscan::testkit {

std::filesystem::path source_dir();
std::filesystem::path fixture_path(const std::string& name);

// Bytecode of the two ransomware snippets, as single-method DEX files. The
// crypto snippet keeps its surrounding non-invoke instructions.
std::vector<std::uint8_t> locker_snippet_dex();
std::vector<std::uint8_t> crypto_snippet_dex();

// The small reference subsets used with the crypto snippet, in the order
// they are presented alongside it.
std::vector<std::string> snippet_reference_keys(Granularity g);

}  // namespace apiscan::testkit
