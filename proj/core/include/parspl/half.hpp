#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <span>

namespace parspl {

// IEEE binary16 storage emulation: round a binary32 value to the nearest
// representable half (ties to even) and widen it back.
inline float round_to_half(float v) noexcept {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  const std::uint32_t sign = bits & 0x80000000u;
  const std::uint32_t abs = bits & 0x7fffffffu;
  if (abs >= 0x7f800000u) return v;  // inf / nan
  // Largest finite half is 65504; anything rounding past it overflows.
  if (abs >= 0x477ff000u) return std::bit_cast<float>(sign | 0x7f800000u);
  const int exp = static_cast<int>(abs >> 23) - 127;
  // Spacing of halves near v: 2^(exp-10) for normals, 2^-24 for subnormals.
  const int ulp_exp = exp < -14 ? -24 : exp - 10;
  const float ulp = std::ldexp(1.0f, ulp_exp);
  const float mag = std::bit_cast<float>(abs);
  const float q = std::nearbyint(mag / ulp) * ulp;  // default rounding is to even
  return std::bit_cast<float>(sign | std::bit_cast<std::uint32_t>(q));
}

inline double round_to_half(double v) noexcept {
  return static_cast<double>(round_to_half(static_cast<float>(v)));
}

template <typename T>
void round_to_half(std::span<T> v) noexcept {
  for (auto& x : v) x = round_to_half(x);
}

}  // namespace parspl
