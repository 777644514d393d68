#pragma once

namespace tracelr {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kModelSchemaVersion = 1;

} // namespace tracelr
