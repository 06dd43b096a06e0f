#pragma once

namespace ntg {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ntg
