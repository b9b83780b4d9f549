#pragma once

#include <string_view>

namespace ccd {

inline constexpr std::string_view kToolName = "ccdetect";
inline constexpr std::string_view kToolVersion = "0.1.0";

} // namespace ccd
