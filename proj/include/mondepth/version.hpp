#pragma once

namespace mondepth {

inline constexpr const char* kToolName = "mondepth";
inline constexpr const char* kToolVersion = "1.0.0";

}  // namespace mondepth
