#pragma once

namespace hood {

inline constexpr const char* kToolVersion = "0.1.0";

} // namespace hood
