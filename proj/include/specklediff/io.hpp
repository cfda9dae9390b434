#pragma once

#include <optional>
#include <string>
#include <vector>

#include "specklediff/image.hpp"

namespace specklediff {

// Raw container: one line of JSON header
//   {"dtype":"float32","endianness":"little","format":"specklediff-raw","shape":[n,h,w],"version":1}
// terminated by '\n', followed by n*h*w little-endian float32 values, slice-major then row-major.
void save_raw(const std::vector<Image>& slices, const std::string& path);
std::vector<Image> load_raw(const std::string& path);

// 16-bit grayscale PNG. Intensities in [lo, hi] map linearly onto 0..65535
// (clamped). 8-bit files are accepted on load.
void save_png16(const Image& img, const std::string& path, float lo = -1.0f, float hi = 1.0f);
Image load_png(const std::string& path, float lo = -1.0f, float hi = 1.0f);

// Uncompressed 16-bit grayscale multi-page TIFF, same intensity mapping as PNG.
void save_tiff16(const std::vector<Image>& pages, const std::string& path, float lo = -1.0f, float hi = 1.0f);
std::vector<Image> load_tiff(const std::string& path, float lo = -1.0f, float hi = 1.0f);

/// How to interpret files when assembling a Volume.
struct VolumeLayout {
  int repeats_per_location = 1;
  std::optional<std::string> snr_label;
  /// Intensity window for integer formats.
  float lo = -1.0f;
  float hi = 1.0f;
};

/// Accepts a .raw container, a .tif/.tiff stack, a single .png, or a directory
/// of PNG files (sorted lexicographically by file name).
Volume load_volume(const std::string& path, const VolumeLayout& layout = {});

/// Writes by extension: .raw (all slices), .tif/.tiff (all slices) or .png (single slice).
void save_volume(const Volume& volume, const std::string& path, float lo = -1.0f, float hi = 1.0f);

Image load_image(const std::string& path, float lo = -1.0f, float hi = 1.0f);
void save_image(const Image& img, const std::string& path, float lo = -1.0f, float hi = 1.0f);

}  // namespace specklediff
