#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "specklediff/image.hpp"
#include "specklediff/rois.hpp"

namespace specklediff {

// OCT conventions used throughout (variances are population variances):
//   SNR  = 10 log10(max_f^2 / var_b)    max_f over foreground ROIs, var_b pooled background
//   PSNR = 10 log10(peak^2 / MSE)       peak = max - min of the reference
//   CNR  = mean_f (mu_f - mu_b) / sqrt((var_f + var_b) / 2)
//   ENL  = mean_h mu_h^2 / var_h        over homogeneous ROIs

double snr_db(const Image& img, const ROISet& rois);
/// +infinity when the images are identical.
double psnr_db(const Image& img, const Image& reference);
double cnr(const Image& img, const ROISet& rois);
double enl(const Image& img, const ROISet& rois);

struct RegionStats {
  double mean = 0.0;
  double variance = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};
/// Pooled statistics over a set of rectangles.
RegionStats region_stats(const Image& img, const std::vector<Rect>& rects);

struct MetricsReport {
  std::string image_id;
  std::string method;
  std::string reference_id;
  /// "intensity" or "normalized".
  std::string domain = "normalized";
  double snr = 0.0;
  double psnr = 0.0;
  bool psnr_infinite = false;
  double cnr = 0.0;
  double enl = 0.0;
  ROISet rois;
};

MetricsReport evaluate(const Image& img, const Image* reference, const ROISet& rois);

void to_json(nlohmann::json& j, const MetricsReport& r);
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsReport& r);

struct TTest {
  double t = 0.0;
  double p = 1.0;
  int dof = 0;
  double mean_difference = 0.0;
};

/// Paired two-tailed t-test on a - b. Throws ContractError for unequal or
/// too-short inputs and DegenerateError when the differences have no spread.
TTest paired_t_test(std::span<const double> a, std::span<const double> b);

/// Spearman rank correlation with average ranks for ties.
double spearman_rho(std::span<const double> x, std::span<const double> y);

}  // namespace specklediff
