#include "specklediff/rois.hpp"

#include <fstream>

#include "specklediff/errors.hpp"

namespace specklediff {

bool Rect::within(const Image& img) const {
  return height > 0 && width > 0 && y >= 0 && x >= 0 && y + height <= img.height() && x + width <= img.width();
}

void ROISet::validate_for(const Image& img) const {
  for (const auto* group : {&background, &foreground, &homogeneous})
    for (const auto& r : *group)
      if (!r.within(img))
        throw ContractError("ROI (" + std::to_string(r.y) + "," + std::to_string(r.x) + "," +
                            std::to_string(r.height) + "," + std::to_string(r.width) +
                            ") is empty or outside the image");
}

void to_json(nlohmann::json& j, const Rect& r) {
  j = nlohmann::json{{"y", r.y}, {"x", r.x}, {"height", r.height}, {"width", r.width}};
}

void from_json(const nlohmann::json& j, Rect& r) {
  j.at("y").get_to(r.y);
  j.at("x").get_to(r.x);
  j.at("height").get_to(r.height);
  j.at("width").get_to(r.width);
}

void to_json(nlohmann::json& j, const ROISet& r) {
  j = nlohmann::json{{"background", r.background}, {"foreground", r.foreground}, {"homogeneous", r.homogeneous}};
}

void from_json(const nlohmann::json& j, ROISet& r) {
  r.background = j.value("background", std::vector<Rect>{});
  r.foreground = j.value("foreground", std::vector<Rect>{});
  r.homogeneous = j.value("homogeneous", std::vector<Rect>{});
}

ROISet load_rois(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ROI file " + path);
  try {
    return nlohmann::json::parse(in).get<ROISet>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed ROI file " + path + ": " + e.what());
  }
}

void save_rois(const ROISet& rois, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write ROI file " + path);
  out << nlohmann::json(rois).dump(2) << '\n';
}

}  // namespace specklediff
