#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "specklediff/image.hpp"

namespace specklediff {

/// Axis-aligned pixel rectangle [y, y + height) x [x, x + width).
struct Rect {
  int y = 0;
  int x = 0;
  int height = 0;
  int width = 0;

  bool within(const Image& img) const;
  friend bool operator==(const Rect&, const Rect&) = default;
};

struct ROISet {
  std::vector<Rect> background;
  std::vector<Rect> foreground;
  std::vector<Rect> homogeneous;

  /// Throws ContractError when a rectangle is empty or leaves the image.
  void validate_for(const Image& img) const;
  friend bool operator==(const ROISet&, const ROISet&) = default;
};

void to_json(nlohmann::json& j, const Rect& r);
void from_json(const nlohmann::json& j, Rect& r);
void to_json(nlohmann::json& j, const ROISet& r);
void from_json(const nlohmann::json& j, ROISet& r);

ROISet load_rois(const std::string& path);
void save_rois(const ROISet& rois, const std::string& path);

}  // namespace specklediff
