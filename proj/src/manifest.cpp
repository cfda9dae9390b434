#include "specklediff/manifest.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "specklediff/errors.hpp"

namespace fs = std::filesystem;

namespace specklediff {

std::string DatasetManifest::resolve(const std::string& relative) const {
  const fs::path p(relative);
  return p.is_absolute() ? p.string() : (fs::path(base_dir) / p).string();
}

std::vector<const DatasetEntry*> DatasetManifest::with_role(const std::string& role) const {
  std::vector<const DatasetEntry*> out;
  for (const auto& e : entries)
    if (e.role == role) out.push_back(&e);
  return out;
}

namespace {

template <typename T>
void put_optional(nlohmann::json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

template <typename T>
std::optional<T> get_optional(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path);
  DatasetManifest m;
  m.base_dir = fs::absolute(fs::path(path)).parent_path().string();
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.value("format", "") != "specklediff-dataset") throw IoError(path + ": not a specklediff dataset manifest");
    for (const auto& e : j.at("entries")) {
      DatasetEntry d;
      d.id = e.at("id").get<std::string>();
      d.role = e.value("role", d.role);
      d.noisy = e.at("noisy").get<std::string>();
      d.clean = get_optional<std::string>(e, "clean");
      d.reference = get_optional<std::string>(e, "reference");
      d.rois = get_optional<std::string>(e, "rois");
      d.repeats_per_location = e.value("repeats_per_location", 1);
      d.snr_label = get_optional<std::string>(e, "snr_label");
      m.entries.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": malformed manifest: " + e.what());
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& d : manifest.entries) {
    nlohmann::json e = {{"id", d.id}, {"role", d.role}, {"noisy", d.noisy}, {"repeats_per_location", d.repeats_per_location}};
    put_optional(e, "clean", d.clean);
    put_optional(e, "reference", d.reference);
    put_optional(e, "rois", d.rois);
    put_optional(e, "snr_label", d.snr_label);
    entries.push_back(std::move(e));
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path);
  out << nlohmann::json{{"format", "specklediff-dataset"}, {"version", 1}, {"entries", entries}}.dump(2) << '\n';
}

}  // namespace specklediff
