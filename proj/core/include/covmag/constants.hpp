#pragma once

#include <numbers>

namespace covmag::constants {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// NV electron gyromagnetic ratio, gamma/2pi in Hz/T.
inline constexpr double gyromag_over_2pi = 28.025e9;

// gamma in rad/s/T; phase = gamma * B * t.
inline constexpr double gyromag = two_pi * gyromag_over_2pi;

}  // namespace covmag::constants
