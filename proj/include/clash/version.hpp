#pragma once

namespace clash {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace clash
