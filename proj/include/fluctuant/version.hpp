#pragma once

namespace fluctuant {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace fluctuant
