#pragma once

namespace coupling {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace coupling
