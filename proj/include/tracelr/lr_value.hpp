#pragma once

namespace tracelr {

// The saturation bounds double as documented infinity/zero sentinels when a
// density underflows on one side only.
inline constexpr double kLrSaturationHigh = 1e300;
inline constexpr double kLrSaturationLow = 1e-300;

struct LrValue {
    double value = 1.0;     // clamped to [kLrSaturationLow, kLrSaturationHigh]
    double log_value = 0.0; // natural log, unclamped
    bool saturated_low = false;
    bool saturated_high = false;
};

} // namespace tracelr
