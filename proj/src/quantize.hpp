#pragma once

#include <cstdint>

namespace specklediff {

std::uint16_t quantize16(float v, float lo, float hi);
float dequantize16(std::uint16_t q, float lo, float hi);

}  // namespace specklediff
