#include "specklediff/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "specklediff/errors.hpp"

namespace specklediff {

Image::Image(int height, int width, float fill) : height_(height), width_(width) {
  if (height <= 0 || width <= 0) throw ContractError("image dimensions must be positive");
  pixels_.assign(static_cast<std::size_t>(height) * width, fill);
}

Image::Image(int height, int width, std::vector<float> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
  if (height <= 0 || width <= 0) throw ContractError("image dimensions must be positive");
  if (pixels_.size() != static_cast<std::size_t>(height) * width)
    throw ContractError("pixel buffer does not match " + std::to_string(height) + "x" +
                        std::to_string(width));
}

float Image::min() const { return *std::min_element(pixels_.begin(), pixels_.end()); }
float Image::max() const { return *std::max_element(pixels_.begin(), pixels_.end()); }

double Image::mean() const {
  double s = 0.0;
  for (float v : pixels_) s += v;
  return pixels_.empty() ? 0.0 : s / static_cast<double>(pixels_.size());
}

bool Image::all_finite() const {
  return std::all_of(pixels_.begin(), pixels_.end(), [](float v) { return std::isfinite(v); });
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b))
    throw ContractError(std::string(what) + ": shape mismatch " + std::to_string(a.height()) + "x" +
                        std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                        std::to_string(b.width()));
}

double mse(const Image& a, const Image& b) {
  require_same_shape(a, b, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double max_abs_diff(const Image& a, const Image& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

void Volume::validate() const {
  if (repeats_per_location < 1) throw ContractError("repeats_per_location must be positive");
  for (const auto& s : slices)
    if (!s.same_shape(slices.front())) throw ContractError("volume slices differ in shape");
  if (!slices.empty() && slices.size() % static_cast<std::size_t>(repeats_per_location) != 0)
    throw ContractError("slice count " + std::to_string(slices.size()) +
                        " is not divisible by repeats_per_location " +
                        std::to_string(repeats_per_location));
}

}  // namespace specklediff
