#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specklediff/image.hpp"
#include "specklediff/rois.hpp"

namespace specklediff {

enum class SpeckleModel { gamma_multiplicative, gaussian_additive };

std::string to_string(SpeckleModel m);
SpeckleModel speckle_model_from_string(const std::string& s);

/// Synthetic b-scan: horizontal layers between a dark vitreous band on top and
/// a dim band below, a gentle common undulation of all boundaries, and dark
/// elliptical vessels in the second layer. Intensities live in [0, 1] before
/// the fixed [0, 1] -> [-1, 1] mapping.
struct PhantomSpec {
  int height = 64;
  int width = 64;
  int layers = 4;
  /// Per-layer intensity, top to bottom. Empty selects a built-in pattern.
  std::vector<double> levels;
  double background_level = 0.05;
  double deep_level = 0.2;
  double vessel_level = 0.08;
  int vessels = 2;
  /// Boundary undulation in pixels.
  double undulation = 1.5;
  SpeckleModel speckle = SpeckleModel::gamma_multiplicative;
  double gamma_shape = 16.0;
  double gaussian_sigma = 0.1;
  bool no_noise = false;
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<double> layer_levels() const;
};

struct Phantom {
  Image clean;
  Image noisy;
  ROISet rois;
};

Phantom make_phantom(const PhantomSpec& spec);

struct PhantomVolume {
  Volume clean;
  Volume noisy;
  ROISet rois;
};

/// Neighbouring slices share the layer geometry, which drifts by `drift`
/// radians of undulation phase per slice; speckle is independent per slice.
PhantomVolume make_phantom_volume(const PhantomSpec& spec, int slices, double drift = 0.05);

/// Multiplies a [0, 1] intensity image by unit-mean gamma(k) speckle (or adds
/// Gaussian noise), clips to [0, 1].
Image apply_speckle(const Image& clean_intensity, const PhantomSpec& spec, std::uint64_t noise_seed);

}  // namespace specklediff
