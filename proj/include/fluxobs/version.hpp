#pragma once

namespace fluxobs {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fluxobs
