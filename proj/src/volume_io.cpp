#include <algorithm>
#include <filesystem>

#include "specklediff/errors.hpp"
#include "specklediff/io.hpp"

namespace fs = std::filesystem;

namespace specklediff {

namespace {

std::string lower_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e;
}

}  // namespace

Volume load_volume(const std::string& path, const VolumeLayout& layout) {
  Volume v;
  v.repeats_per_location = layout.repeats_per_location;
  v.snr_label = layout.snr_label;
  v.source = path;
  const fs::path p(path);
  if (fs::is_directory(p)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(p))
      if (entry.is_regular_file() && lower_ext(entry.path()) == ".png") files.push_back(entry.path());
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    if (files.empty()) throw IoError(path + ": directory contains no PNG files");
    for (const auto& f : files) v.slices.push_back(load_png(f.string(), layout.lo, layout.hi));
  } else {
    const std::string ext = lower_ext(p);
    if (ext == ".raw")
      v.slices = load_raw(path);
    else if (ext == ".tif" || ext == ".tiff")
      v.slices = load_tiff(path, layout.lo, layout.hi);
    else if (ext == ".png")
      v.slices.push_back(load_png(path, layout.lo, layout.hi));
    else
      throw IoError(path + ": unrecognised volume format");
  }
  try {
    v.validate();
  } catch (const ContractError& e) {
    throw IoError(path + ": " + e.what());
  }
  return v;
}

void save_volume(const Volume& volume, const std::string& path, float lo, float hi) {
  const std::string ext = lower_ext(path);
  if (ext == ".raw")
    save_raw(volume.slices, path);
  else if (ext == ".tif" || ext == ".tiff")
    save_tiff16(volume.slices, path, lo, hi);
  else if (ext == ".png") {
    if (volume.slices.size() != 1) throw IoError(path + ": PNG holds exactly one slice");
    save_png16(volume.slices.front(), path, lo, hi);
  } else {
    throw IoError(path + ": unrecognised volume format");
  }
}

Image load_image(const std::string& path, float lo, float hi) {
  Volume v = load_volume(path, VolumeLayout{1, std::nullopt, lo, hi});
  if (v.slices.size() != 1) throw IoError(path + ": expected a single image, found " + std::to_string(v.slices.size()));
  return std::move(v.slices.front());
}

void save_image(const Image& img, const std::string& path, float lo, float hi) {
  Volume v;
  v.slices.push_back(img);
  save_volume(v, path, lo, hi);
}

}  // namespace specklediff
