#pragma once

namespace hhfs {

inline constexpr int schema_version = 1;
inline constexpr const char* library_version = "1.0.0";

}  // namespace hhfs
