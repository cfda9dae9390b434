#pragma once

#include <optional>
#include <string>
#include <vector>

namespace specklediff {

/// One volume (or single image) of a dataset. Paths are relative to the
/// manifest's directory unless absolute.
struct DatasetEntry {
  std::string id;
  /// "train" or "test".
  std::string role = "train";
  std::string noisy;
  std::optional<std::string> clean;
  /// Self-fused training target.
  std::optional<std::string> reference;
  std::optional<std::string> rois;
  int repeats_per_location = 1;
  std::optional<std::string> snr_label;
};

// {"format": "specklediff-dataset", "version": 1, "entries": [{...DatasetEntry fields...}]}
struct DatasetManifest {
  std::vector<DatasetEntry> entries;
  /// Directory the relative paths are resolved against (not serialized).
  std::string base_dir = ".";

  std::string resolve(const std::string& relative) const;
  std::vector<const DatasetEntry*> with_role(const std::string& role) const;
};

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

}  // namespace specklediff
