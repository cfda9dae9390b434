#include "cli_common.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <thread>

#include <json.hpp>

#include "specklediff/errors.hpp"
#include "specklediff/preprocess.hpp"
#include "specklediff/sampler.hpp"

namespace fs = std::filesystem;

namespace specklediff::cli {

namespace {

std::string scalar_text(const std::string& key, const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  if (v.is_number_float()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
    return buf;
  }
  throw CLI::ConfigError("config key '" + key + "' must hold a string, number, boolean or array of those");
}

}  // namespace

std::string JsonConfig::to_config(const CLI::App* app, bool default_also, bool, std::string) const {
  nlohmann::json j = nlohmann::json::object();
  for (const CLI::Option* opt : app->get_options({})) {
    if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
    std::string key = opt->get_lnames().front();
    std::replace(key.begin(), key.end(), '-', '_');
    const auto& results = opt->results();
    if (!results.empty())
      j[key] = results.size() == 1 ? nlohmann::json(results.front()) : nlohmann::json(results);
    else if (default_also && !opt->get_default_str().empty())
      j[key] = opt->get_default_str();
  }
  return j.dump(2);
}

std::vector<CLI::ConfigItem> JsonConfig::from_config(std::istream& input) const {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(input);
  } catch (const nlohmann::json::exception& e) {
    throw CLI::ConfigError(std::string("config file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw CLI::ConfigError("config file must hold one flat JSON object");
  std::vector<std::string> parents;
  for (const CLI::App* sub : root_->get_subcommands()) parents.push_back(sub->get_name());
  std::vector<CLI::ConfigItem> items;
  for (const auto& [key, value] : j.items()) {
    CLI::ConfigItem item;
    item.parents = parents;
    item.name = key;
    std::replace(item.name.begin(), item.name.end(), '_', '-');
    if (value.is_array()) {
      for (const auto& v : value) item.inputs.push_back(scalar_text(key, v));
    } else {
      item.inputs.push_back(scalar_text(key, value));
    }
    items.push_back(std::move(item));
  }
  return items;
}

void add_config_option(CLI::App& root) {
  root.config_formatter(std::make_shared<JsonConfig>(&root));
  root.set_config("--config", "", "Flat JSON file of option values; command-line flags take precedence");
  root.allow_config_extras(CLI::config_extras_mode::ignore);
  root.fallthrough();
}

Normalization normalization_from_string(const std::string& s) {
  if (s == "auto") return Normalization::automatic;
  if (s == "none") return Normalization::none;
  if (s == "image") return Normalization::image;
  if (s == "volume") return Normalization::volume;
  throw ConfigError("unknown normalization '" + s + "'");
}

Volume apply_normalization(const Volume& volume, Normalization mode) {
  Volume out = volume;
  switch (mode) {
    case Normalization::none:
      return out;
    case Normalization::volume:
      return normalize_volume(volume);
    case Normalization::image:
      for (auto& s : out.slices) s = normalize(s);
      return out;
    case Normalization::automatic:
      for (auto& s : out.slices) {
        const bool inside = s.all_finite() && s.min() >= -1.0f - kNormalizedTolerance &&
                            s.max() <= 1.0f + kNormalizedTolerance;
        if (!inside) s = normalize(s);
      }
      return out;
  }
  return out;
}

Image to_metric_domain(const Image& img, const std::string& domain) {
  if (domain == "normalized") return img;
  if (domain == "intensity") return denormalize_range(img, 0.0f, 1.0f);
  throw ConfigError("unknown metric domain '" + domain + "'");
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  std::vector<std::exception_ptr> errors(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string indexed_name(const std::string& stem, std::size_t index, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", digits, index);
  return stem + buf;
}

std::string relative_to(const std::string& target, const std::string& base_dir) {
  const fs::path t = fs::weakly_canonical(fs::absolute(target));
  const fs::path b = fs::weakly_canonical(fs::absolute(base_dir));
  const fs::path rel = t.lexically_relative(b);
  return rel.empty() ? t.string() : rel.string();
}

int report_error(const std::string& kind, const std::string& message, int exit_code) {
  const nlohmann::json line{{"error", {{"kind", kind}, {"message", message}, {"exit_code", exit_code}}}};
  std::cerr << line.dump() << std::endl;
  return exit_code;
}

}  // namespace specklediff::cli
