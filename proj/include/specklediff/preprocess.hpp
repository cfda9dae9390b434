#pragma once

#include <vector>

#include "specklediff/image.hpp"

namespace specklediff {

/// Affine map of [min, max] onto [-1, 1]. Throws DegenerateError on a constant image.
Image normalize(const Image& img);

/// Affine map of the fixed window [lo, hi] onto [-1, 1]; values outside the window are clipped.
Image normalize_range(const Image& img, float lo, float hi);

/// Inverse of normalize_range (no clipping).
Image denormalize_range(const Image& img, float lo, float hi);

/// One affine map for the whole volume, taken from its global min/max.
Volume normalize_volume(const Volume& volume);

struct CropInfo {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;

  friend bool operator==(const CropInfo&, const CropInfo&) = default;
};

struct Padded {
  Image image;
  /// Window of the original content inside `image`.
  CropInfo crop;
};

/// Pads symmetrically to target x target; the odd pixel, if any, goes to the
/// bottom/right. Throws SizeError when a side already exceeds `target`.
Padded pad_to_square(const Image& img, int target, float pad_value = -1.0f);

Image crop(const Image& img, const CropInfo& window);

/// Pixel-wise mean of >= 2 same-shape frames.
Image average_repeats(const std::vector<Image>& frames);

/// Averages each consecutive group of `repeats_per_location` slices.
Volume average_volume_repeats(const Volume& volume);

}  // namespace specklediff
