#include "specklediff/self_fusion.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <iostream>

#include "specklediff/errors.hpp"

namespace specklediff {

void FusionConfig::validate() const {
  if (radius < 1) throw ConfigError("fusion radius must be >= 1");
  if (bandwidth && !(*bandwidth > 0.0)) throw ConfigError("fusion bandwidth must be positive");
  if (max_parallel < 1) throw ConfigError("max_parallel must be >= 1");
}

double similarity_weight(const Image& a, const Image& b, double h) {
  if (!(h > 0.0)) throw ConfigError("similarity bandwidth must be positive");
  return std::exp(-mse(a, b) / h);
}

double median_neighbor_mse(const Volume& volume, const FusionConfig& config) {
  config.validate();
  volume.validate();
  const int n = static_cast<int>(volume.size());
  std::vector<double> values;
  for (int i = 0; i < n; ++i)
    for (int j = std::max(0, i - config.radius); j <= std::min(n - 1, i + config.radius); ++j) {
      if (j == i) continue;
      const auto reg = register_image(volume.slices[static_cast<std::size_t>(j)],
                                      volume.slices[static_cast<std::size_t>(i)], config.registration,
                                      config.registration_options);
      values.push_back(mse(reg.image, volume.slices[static_cast<std::size_t>(i)]));
    }
  if (values.empty()) return 1.0;
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  const double med = values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
  // Identical neighbours give zero; any positive h then yields uniform weights.
  return med > 0.0 ? med : 1.0;
}

namespace {

Image fuse_with_bandwidth(const Volume& volume, int index, const FusionConfig& config, double h) {
  const int n = static_cast<int>(volume.size());
  const Image& target = volume.slices[static_cast<std::size_t>(index)];
  std::vector<double> acc(target.size(), 0.0);
  double wsum = 0.0;
  for (int j = std::max(0, index - config.radius); j <= std::min(n - 1, index + config.radius); ++j) {
    Image atlas = j == index ? target
                             : register_image(volume.slices[static_cast<std::size_t>(j)], target,
                                              config.registration, config.registration_options)
                                   .image;
    const double w = j == index ? 1.0 : similarity_weight(atlas, target, h);
    wsum += w;
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * atlas[i];
  }
  Image out(target.height(), target.width());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i] / wsum);
  return out;
}

}  // namespace

Image fuse(const Volume& volume, int index, const FusionConfig& config) {
  config.validate();
  volume.validate();
  if (index < 0 || index >= static_cast<int>(volume.size()))
    throw IndexError("fuse: slice index " + std::to_string(index) + " outside volume of " +
                     std::to_string(volume.size()));
  if (volume.size() == 1) {
    std::clog << "warning: self-fusion of a single-slice volume returns the slice unchanged\n";
    return volume.slices.front();
  }
  const double h = config.bandwidth ? *config.bandwidth : median_neighbor_mse(volume, config);
  return fuse_with_bandwidth(volume, index, config, h);
}

Volume fuse_volume(const Volume& volume, const FusionConfig& config) {
  config.validate();
  volume.validate();
  Volume out;
  out.repeats_per_location = volume.repeats_per_location;
  out.snr_label = volume.snr_label;
  out.source = volume.source + " (self-fused, r=" + std::to_string(config.radius) + ")";
  if (volume.size() <= 1) {
    if (volume.size() == 1) std::clog << "warning: self-fusion of a single-slice volume returns the slice unchanged\n";
    out.slices = volume.slices;
    return out;
  }
  const double h = config.bandwidth ? *config.bandwidth : median_neighbor_mse(volume, config);
  const int n = static_cast<int>(volume.size());
  out.slices.resize(volume.size());
  for (int begin = 0; begin < n; begin += config.max_parallel) {
    const int end = std::min(n, begin + config.max_parallel);
    if (end - begin == 1) {
      out.slices[static_cast<std::size_t>(begin)] = fuse_with_bandwidth(volume, begin, config, h);
      continue;
    }
    std::vector<std::future<Image>> jobs;
    for (int i = begin; i < end; ++i)
      jobs.push_back(std::async(std::launch::async, fuse_with_bandwidth, std::cref(volume), i, std::cref(config), h));
    for (int i = begin; i < end; ++i) out.slices[static_cast<std::size_t>(i)] = jobs[static_cast<std::size_t>(i - begin)].get();
  }
  return out;
}

}  // namespace specklediff
