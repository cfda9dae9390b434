#pragma once

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "specklediff/image.hpp"

namespace specklediff::cli {

/// Bad input detected by the tool itself; reported with exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads a flat JSON object as CLI11 config items. Keys use snake_case and map
/// onto the kebab-case long flag of the same name; arrays become repeated values.
/// Items are routed to whichever subcommand of `root` was selected.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App* root) : root_(root) {}
  std::string to_config(const CLI::App* app, bool default_also, bool write_description,
                        std::string prefix) const override;
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;

 private:
  const CLI::App* root_;
};

/// Adds --config to the root app. Subcommands fall through to it, so it may be
/// given after the subcommand name; keys the subcommand does not know are ignored.
void add_config_option(CLI::App& root);

/// "auto" leaves data already inside [-1, 1] alone and min/max-normalizes anything else.
enum class Normalization { automatic, none, image, volume };
Normalization normalization_from_string(const std::string& s);
inline const std::vector<std::string> kNormalizationNames{"auto", "none", "image", "volume"};
Volume apply_normalization(const Volume& volume, Normalization mode);

/// Metric domains: "intensity" maps the [-1, 1] working range back onto [0, 1];
/// "normalized" evaluates the working range as is.
inline const std::vector<std::string> kDomainNames{"intensity", "normalized"};
Image to_metric_domain(const Image& img, const std::string& domain);

/// Runs fn(0..n-1) on up to `jobs` threads. Results stay in index order; the
/// first failure (by index) is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

/// "{dir}/{stem}" with a zero-padded index.
std::string indexed_name(const std::string& stem, std::size_t index, int digits = 3);

/// `target` expressed relative to `base_dir` when possible.
std::string relative_to(const std::string& target, const std::string& base_dir);

/// Writes one machine-readable error line to stderr and returns the exit code.
int report_error(const std::string& kind, const std::string& message, int exit_code);

}  // namespace specklediff::cli
