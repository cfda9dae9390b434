#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace specklediff {

/// Single-channel 2D intensity array, row-major.
class Image {
 public:
  Image() = default;
  Image(int height, int width, float fill = 0.0f);
  Image(int height, int width, std::vector<float> pixels);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  float& operator()(int y, int x) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  float operator()(int y, int x) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  float& operator[](std::size_t i) { return pixels_[i]; }
  float operator[](std::size_t i) const { return pixels_[i]; }

  std::span<float> pixels() { return pixels_; }
  std::span<const float> pixels() const { return pixels_; }
  const std::vector<float>& data() const { return pixels_; }

  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  float min() const;
  float max() const;
  double mean() const;
  bool all_finite() const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> pixels_;
};

/// Throws ContractError naming `what` when the shapes differ.
void require_same_shape(const Image& a, const Image& b, const char* what);

double mse(const Image& a, const Image& b);
double max_abs_diff(const Image& a, const Image& b);

/// Ordered stack of b-scans.
struct Volume {
  std::vector<Image> slices;
  int repeats_per_location = 1;
  std::optional<std::string> snr_label;
  std::string source;

  std::size_t size() const { return slices.size(); }
  /// Throws ContractError unless all slices share one shape and the repeat
  /// grouping divides the slice count.
  void validate() const;
};

}  // namespace specklediff
