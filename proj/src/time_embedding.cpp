#include "specklediff/time_embedding.hpp"

#include <cmath>
#include <string>

#include "specklediff/errors.hpp"

namespace specklediff {

std::vector<double> time_embedding(int t, int dim) {
  if (dim <= 0 || dim % 2 != 0)
    throw ConfigError("time embedding dimension must be positive and even, got " + std::to_string(dim));
  const int half = dim / 2;
  std::vector<double> out(static_cast<std::size_t>(dim));
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / half);
    const double arg = static_cast<double>(t) * freq;
    out[static_cast<std::size_t>(2 * i)] = std::sin(arg);
    out[static_cast<std::size_t>(2 * i + 1)] = std::cos(arg);
  }
  return out;
}

}  // namespace specklediff
