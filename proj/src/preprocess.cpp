#include "specklediff/preprocess.hpp"

#include <algorithm>
#include <string>

#include "specklediff/errors.hpp"

namespace specklediff {

namespace {

Image affine(const Image& img, double lo, double hi, bool clip) {
  Image out(img.height(), img.width());
  const double range = hi - lo;
  for (std::size_t i = 0; i < img.size(); ++i) {
    double v = 2.0 * (img[i] - lo) / range - 1.0;
    if (clip) v = std::clamp(v, -1.0, 1.0);
    out[i] = static_cast<float>(v);
  }
  return out;
}

}  // namespace

Image normalize(const Image& img) {
  const float lo = img.min(), hi = img.max();
  if (!(hi > lo)) throw DegenerateError("normalize: image has zero dynamic range");
  return affine(img, lo, hi, false);
}

Image normalize_range(const Image& img, float lo, float hi) {
  if (!(hi > lo)) throw ConfigError("normalize_range: empty window");
  return affine(img, lo, hi, true);
}

Image denormalize_range(const Image& img, float lo, float hi) {
  Image out(img.height(), img.width());
  const double half = 0.5 * (static_cast<double>(hi) - lo);
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = static_cast<float>((img[i] + 1.0) * half + lo);
  return out;
}

Volume normalize_volume(const Volume& volume) {
  if (volume.slices.empty()) throw ContractError("normalize_volume: empty volume");
  float lo = volume.slices.front().min(), hi = volume.slices.front().max();
  for (const auto& s : volume.slices) {
    lo = std::min(lo, s.min());
    hi = std::max(hi, s.max());
  }
  if (!(hi > lo)) throw DegenerateError("normalize_volume: volume has zero dynamic range");
  Volume out = volume;
  for (auto& s : out.slices) s = affine(s, lo, hi, false);
  return out;
}

Padded pad_to_square(const Image& img, int target, float pad_value) {
  if (img.height() > target || img.width() > target)
    throw SizeError("pad_to_square: " + std::to_string(img.height()) + "x" + std::to_string(img.width()) +
                    " exceeds target " + std::to_string(target));
  Padded out{Image(target, target, pad_value), {}};
  out.crop = {(target - img.height()) / 2, (target - img.width()) / 2, img.height(), img.width()};
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) out.image(y + out.crop.top, x + out.crop.left) = img(y, x);
  return out;
}

Image crop(const Image& img, const CropInfo& w) {
  if (w.top < 0 || w.left < 0 || w.height <= 0 || w.width <= 0 || w.top + w.height > img.height() ||
      w.left + w.width > img.width())
    throw SizeError("crop window outside image");
  Image out(w.height, w.width);
  for (int y = 0; y < w.height; ++y)
    for (int x = 0; x < w.width; ++x) out(y, x) = img(y + w.top, x + w.left);
  return out;
}

Image average_repeats(const std::vector<Image>& frames) {
  if (frames.size() < 2) throw ContractError("average_repeats needs at least two frames");
  std::vector<double> acc(frames.front().size(), 0.0);
  for (const auto& f : frames) {
    require_same_shape(frames.front(), f, "average_repeats");
    for (std::size_t i = 0; i < f.size(); ++i) acc[i] += f[i];
  }
  Image out(frames.front().height(), frames.front().width());
  const double n = static_cast<double>(frames.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i] / n);
  return out;
}

Volume average_volume_repeats(const Volume& volume) {
  volume.validate();
  const auto r = static_cast<std::size_t>(volume.repeats_per_location);
  Volume out;
  out.repeats_per_location = 1;
  out.snr_label = volume.snr_label;
  out.source = volume.source;
  if (r == 1) {
    out.slices = volume.slices;
    return out;
  }
  for (std::size_t i = 0; i < volume.slices.size(); i += r)
    out.slices.push_back(average_repeats({volume.slices.begin() + static_cast<std::ptrdiff_t>(i),
                                          volume.slices.begin() + static_cast<std::ptrdiff_t>(i + r)}));
  return out;
}

}  // namespace specklediff
