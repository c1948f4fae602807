#pragma once

#include <string_view>

namespace apiscan {

inline constexpr std::string_view kToolVersion = "0.1.0";

}  // namespace apiscan
