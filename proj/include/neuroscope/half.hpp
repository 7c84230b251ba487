#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace neuroscope {

/// Largest finite IEEE 754 binary16 value.
inline constexpr float kHalfMax = 65504.0f;

/// IEEE 754 binary32 -> binary16, round to nearest, ties to even.
/// Values beyond the half range become +-inf; NaN stays NaN.
std::uint16_t float_to_half(float value) noexcept;

/// Exact binary16 -> binary32 widening.
float half_to_float(std::uint16_t bits) noexcept;

/// Value after a round trip through binary16.
inline float round_to_half(float value) noexcept { return half_to_float(float_to_half(value)); }

void floats_to_halves(std::span<const float> in, std::span<std::uint16_t> out) noexcept;
void halves_to_floats(std::span<const std::uint16_t> in, std::span<float> out) noexcept;

}  // namespace neuroscope
