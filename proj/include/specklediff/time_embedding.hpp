#pragma once

#include <vector>

namespace specklediff {

/// Sinusoidal step embedding, interleaved as [sin(t f_0), cos(t f_0), sin(t f_1), ...]
/// with geometric frequencies f_i = 10000^(-i / (dim/2)). Throws ConfigError for odd
/// or non-positive `dim`.
std::vector<double> time_embedding(int t, int dim);

}  // namespace specklediff
