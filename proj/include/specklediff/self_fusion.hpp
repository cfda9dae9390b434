#pragma once

#include <optional>

#include "specklediff/image.hpp"
#include "specklediff/registration.hpp"

namespace specklediff {

struct FusionConfig {
  int radius = 3;
  /// Similarity bandwidth h. Unset means: median MSE between each slice and
  /// its registered neighbours across the volume.
  std::optional<double> bandwidth;
  RegistrationMethod registration = RegistrationMethod::translation;
  RegistrationOptions registration_options;
  /// Upper bound on slices fused concurrently by fuse_volume.
  int max_parallel = 1;

  void validate() const;
};

/// exp(-MSE(a, b) / h).
double similarity_weight(const Image& a, const Image& b, double h);

/// Median over all (slice, neighbour within radius) pairs of the registered MSE.
double median_neighbor_mse(const Volume& volume, const FusionConfig& config);

/// Similarity-weighted average of slice `index` and its registered neighbours
/// within the radius (window truncated at the volume ends). The target enters
/// with weight 1 before normalization.
Image fuse(const Volume& volume, int index, const FusionConfig& config);

/// Fuses every slice, resolving the bandwidth once for the whole volume.
Volume fuse_volume(const Volume& volume, const FusionConfig& config);

}  // namespace specklediff
