#include "specklediff/metrics.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "specklediff/errors.hpp"

namespace specklediff {

RegionStats region_stats(const Image& img, const std::vector<Rect>& rects) {
  RegionStats s;
  double sum = 0.0;
  s.max = -std::numeric_limits<double>::infinity();
  for (const auto& r : rects) {
    if (!r.within(img)) throw ContractError("ROI outside image bounds");
    for (int y = r.y; y < r.y + r.height; ++y)
      for (int x = r.x; x < r.x + r.width; ++x) {
        const double v = img(y, x);
        sum += v;
        s.max = std::max(s.max, v);
        ++s.count;
      }
  }
  if (s.count == 0) throw ContractError("empty ROI set");
  s.mean = sum / static_cast<double>(s.count);
  double sq = 0.0;
  for (const auto& r : rects)
    for (int y = r.y; y < r.y + r.height; ++y)
      for (int x = r.x; x < r.x + r.width; ++x) {
        const double d = img(y, x) - s.mean;
        sq += d * d;
      }
  s.variance = sq / static_cast<double>(s.count);
  return s;
}

double snr_db(const Image& img, const ROISet& rois) {
  if (rois.foreground.empty() || rois.background.empty())
    throw ContractError("snr needs foreground and background ROIs");
  const auto fg = region_stats(img, rois.foreground);
  const auto bg = region_stats(img, rois.background);
  if (!(bg.variance > 0.0)) throw DegenerateError("snr: background ROI has zero variance");
  return 10.0 * std::log10(fg.max * fg.max / bg.variance);
}

double psnr_db(const Image& img, const Image& reference) {
  require_same_shape(img, reference, "psnr");
  const double err = mse(img, reference);
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  const double peak = static_cast<double>(reference.max()) - reference.min();
  if (!(peak > 0.0)) throw DegenerateError("psnr: reference has zero dynamic range");
  return 10.0 * std::log10(peak * peak / err);
}

double cnr(const Image& img, const ROISet& rois) {
  if (rois.foreground.empty() || rois.background.empty())
    throw ContractError("cnr needs foreground and background ROIs");
  const auto bg = region_stats(img, rois.background);
  if (!(bg.variance > 0.0)) throw DegenerateError("cnr: background ROI has zero variance");
  double acc = 0.0;
  for (const auto& r : rois.foreground) {
    const auto fg = region_stats(img, {r});
    acc += (fg.mean - bg.mean) / std::sqrt(0.5 * (fg.variance + bg.variance));
  }
  return acc / static_cast<double>(rois.foreground.size());
}

double enl(const Image& img, const ROISet& rois) {
  if (rois.homogeneous.empty()) throw ContractError("enl needs homogeneous ROIs");
  double acc = 0.0;
  for (const auto& r : rois.homogeneous) {
    const auto s = region_stats(img, {r});
    if (!(s.variance > 0.0)) throw DegenerateError("enl: homogeneous ROI has zero variance");
    acc += s.mean * s.mean / s.variance;
  }
  return acc / static_cast<double>(rois.homogeneous.size());
}

MetricsReport evaluate(const Image& img, const Image* reference, const ROISet& rois) {
  MetricsReport r;
  r.rois = rois;
  // A degenerate ROI (e.g. a noise-free reference) leaves that metric NaN.
  const auto guarded = [](auto&& f) {
    try {
      return f();
    } catch (const DegenerateError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  r.snr = guarded([&] { return snr_db(img, rois); });
  r.cnr = guarded([&] { return cnr(img, rois); });
  r.enl = guarded([&] { return enl(img, rois); });
  if (reference) {
    r.psnr = psnr_db(img, *reference);
    r.psnr_infinite = std::isinf(r.psnr);
  } else {
    r.psnr = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

void csv_number(std::ostream& s, double v) {
  if (std::isfinite(v)) s << v;
}

}  // namespace

void to_json(nlohmann::json& j, const MetricsReport& r) {
  j = nlohmann::json{{"image_id", r.image_id},
                     {"method", r.method},
                     {"reference_id", r.reference_id},
                     {"domain", r.domain},
                     {"snr", number_or_null(r.snr)},
                     {"psnr", number_or_null(r.psnr)},
                     {"psnr_infinite", r.psnr_infinite},
                     {"cnr", number_or_null(r.cnr)},
                     {"enl", number_or_null(r.enl)},
                     {"rois", r.rois}};
}

std::string metrics_csv_header() { return "image_id,method,reference_id,domain,snr,psnr,cnr,enl"; }

std::string metrics_csv_row(const MetricsReport& r) {
  std::ostringstream s;
  s.precision(10);
  s << r.image_id << ',' << r.method << ',' << r.reference_id << ',' << r.domain << ',';
  csv_number(s, r.snr);
  s << ',';
  if (r.psnr_infinite)
    s << "inf";
  else
    csv_number(s, r.psnr);
  s << ',';
  csv_number(s, r.cnr);
  s << ',';
  csv_number(s, r.enl);
  return s.str();
}

TTest paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("paired_t_test: samples differ in length");
  if (a.size() < 2) throw ContractError("paired_t_test: need at least two pairs");
  const auto n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  const double var = ss / (n - 1.0);
  if (!(var > 0.0)) throw DegenerateError("paired_t_test: differences have zero variance");
  TTest out;
  out.dof = static_cast<int>(a.size()) - 1;
  out.mean_difference = mean;
  out.t = mean / std::sqrt(var / n);
  const boost::math::students_t dist(static_cast<double>(out.dof));
  out.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.t)));
  return out;
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractError("spearman_rho: need two equal-length samples");
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (!(sxx > 0 && syy > 0)) throw DegenerateError("spearman_rho: constant sample");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace specklediff
