#pragma once

namespace scr {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace scr
