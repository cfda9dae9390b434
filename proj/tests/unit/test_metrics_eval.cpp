#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "specklediff/errors.hpp"
#include "specklediff/metrics.hpp"
#include "specklediff/phantom.hpp"

using namespace specklediff;

namespace {

// Two-region image: rows [0, 16) background, rows [16, 32) foreground.
Image two_regions(double mu_b, double sd_b, double mu_f, double sd_f, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nb(mu_b, sd_b), nf(mu_f, sd_f);
  Image img(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) img(y, x) = static_cast<float>(y < 16 ? nb(rng) : nf(rng));
  return img;
}

ROISet two_region_rois() {
  ROISet r;
  r.background = {{0, 0, 16, 32}};
  r.foreground = {{16, 0, 16, 32}};
  r.homogeneous = {{16, 0, 16, 32}};
  return r;
}

}  // namespace

TEST_CASE("psnr") {
  const Image ref = oracle::random_image(16, 16, 1);
  Image ramp(16, 16);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = -1.0f + 2.0f * static_cast<float>(i) / 255.0f;
  Image off = ramp;
  for (auto& v : off.pixels()) v += 0.01f;
  CHECK(psnr_db(off, ramp) == doctest::Approx(10.0 * std::log10(4.0 / 1e-4)).epsilon(1e-4));
  CHECK(psnr_db(off, ramp) == doctest::Approx(46.02).epsilon(1e-3));
  CHECK(std::isinf(psnr_db(ref, ref)));
  double prev = INFINITY;
  for (double amp : {0.01, 0.02, 0.05, 0.1, 0.2, 0.5}) {
    Image noisy = ref;
    const Image n = oracle::gaussian_image(16, 16, 9);
    for (std::size_t i = 0; i < noisy.size(); ++i) noisy[i] += static_cast<float>(amp) * n[i];
    const double p = psnr_db(noisy, ref);
    CHECK(p < prev);
    prev = p;
  }
  CHECK_THROWS_AS(psnr_db(ref, Image(16, 15)), ContractError);
  CHECK_THROWS_AS(psnr_db(ref, Image(16, 16, 0.3f)), DegenerateError);
}

TEST_CASE("snr and cnr closed forms") {
  const ROISet rois = two_region_rois();
  Image img = two_regions(0.1, 0.05, 0.6, 0.1, 3);
  const auto bg = region_stats(img, rois.background);
  const auto fg = region_stats(img, rois.foreground);
  CHECK(snr_db(img, rois) == doctest::Approx(10 * std::log10(fg.max * fg.max / bg.variance)).epsilon(1e-12));
  CHECK(cnr(img, rois) ==
        doctest::Approx((fg.mean - bg.mean) / std::sqrt(0.5 * (fg.variance + bg.variance))).epsilon(1e-12));
  CHECK(bg.variance == doctest::Approx(0.0025).epsilon(0.15));

  ROISet swapped = rois;
  std::swap(swapped.background, swapped.foreground);
  CHECK(cnr(img, swapped) == doctest::Approx(-cnr(img, rois)).epsilon(1e-12));

  const Image same = two_regions(0.4, 0.05, 0.4, 0.05, 4);
  Image equal_means = same;
  const double shift = region_stats(same, rois.background).mean - region_stats(same, rois.foreground).mean;
  for (int y = 16; y < 32; ++y)
    for (int x = 0; x < 32; ++x) equal_means(y, x) += static_cast<float>(shift);
  CHECK(std::fabs(cnr(equal_means, rois)) < 1e-5);

  Image flat = img;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 32; ++x) flat(y, x) = 0.1f;
  CHECK_THROWS_AS(snr_db(flat, rois), DegenerateError);
  CHECK_THROWS_AS(cnr(flat, rois), DegenerateError);
  CHECK_THROWS_AS(snr_db(img, ROISet{}), ContractError);
}

TEST_CASE("enl") {
  const ROISet rois = two_region_rois();
  for (double k : {2.0, 8.0, 25.0}) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(k));
    std::gamma_distribution<double> g(k, 1.0 / k);
    Image img(256, 256);
    for (auto& v : img.pixels()) v = static_cast<float>(0.5 * g(rng));
    ROISet whole;
    whole.homogeneous = {{0, 0, 256, 256}};
    CAPTURE(k);
    CHECK(enl(img, whole) == doctest::Approx(k).epsilon(0.05));
    Image scaled = img;
    for (auto& v : scaled.pixels()) v *= 3.0f;
    CHECK(enl(scaled, whole) == doctest::Approx(enl(img, whole)).epsilon(1e-5));
    CHECK(enl(img, whole) >= 0.0);
  }
  CHECK_THROWS_AS(enl(Image(32, 32, 0.5f), rois), DegenerateError);
  CHECK_THROWS_AS(enl(Image(32, 32, 0.5f), ROISet{}), ContractError);
}

TEST_CASE("metrics report") {
  PhantomSpec spec;
  const Phantom ph = make_phantom(spec);
  MetricsReport r = evaluate(ph.noisy, &ph.clean, ph.rois);
  CHECK(std::isfinite(r.snr));
  CHECK(std::isfinite(r.psnr));
  CHECK_FALSE(r.psnr_infinite);
  CHECK(r.enl >= 0.0);
  CHECK(r.rois == ph.rois);
  const MetricsReport same = evaluate(ph.clean, &ph.clean, ph.rois);
  CHECK(same.psnr_infinite);
  r.image_id = "p0";
  r.method = "noisy";
  nlohmann::json j = r;
  CHECK(j["image_id"] == "p0");
  CHECK(j.contains("rois"));
  nlohmann::json js = same;
  CHECK(js["psnr"].is_null());
  CHECK(js["psnr_infinite"] == true);
  CHECK(metrics_csv_header() == "image_id,method,reference_id,domain,snr,psnr,cnr,enl");
  CHECK(metrics_csv_row(same).find("inf") != std::string::npos);
  const MetricsReport no_ref = evaluate(ph.noisy, nullptr, ph.rois);
  CHECK(std::isnan(no_ref.psnr));
}

TEST_CASE("paired t-test") {
  SUBCASE("hand value") {
    // d = [1, 1, 1, 1, -1]: mean 0.6, sd sqrt(0.8), t = 0.6 / (sqrt(0.8) / sqrt(5)) = 1.5.
    const std::vector<double> a{2, 2, 2, 2, 0}, b{1, 1, 1, 1, 1};
    const TTest r = paired_t_test(a, b);
    CHECK(r.t == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(r.dof == 4);
    CHECK(r.mean_difference == doctest::Approx(0.6));
    CHECK(r.p == doctest::Approx(oracle::student_two_tailed_p(1.5, 4)).epsilon(1e-8));
    // Table: the two-tailed 0.20 critical value for 4 dof is 1.533, so p is just above 0.2.
    CHECK(r.p > 0.2);
    CHECK(r.p < 0.22);
    const TTest rev = paired_t_test(b, a);
    CHECK(rev.t == doctest::Approx(-r.t).epsilon(1e-12));
    CHECK(rev.p == doctest::Approx(r.p).epsilon(1e-12));
  }
  SUBCASE("more p-values against the integrated density") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int k = 0; k < 5; ++k) {
      std::vector<double> a, b;
      for (int i = 0; i < 8 + k; ++i) {
        a.push_back(n(rng) + 0.3);
        b.push_back(n(rng));
      }
      const TTest r = paired_t_test(a, b);
      CHECK(r.p == doctest::Approx(oracle::student_two_tailed_p(r.t, r.dof)).epsilon(1e-7));
    }
  }
  SUBCASE("errors") {
    const std::vector<double> a{1, 2, 3};
    CHECK_THROWS_AS(paired_t_test(a, a), DegenerateError);
    const std::vector<double> shifted{2, 3, 4};
    CHECK_THROWS_AS(paired_t_test(a, shifted), DegenerateError);
    CHECK_THROWS_AS(paired_t_test(a, std::vector<double>{1, 2}), ContractError);
    CHECK_THROWS_AS(paired_t_test(std::vector<double>{1}, std::vector<double>{2}), ContractError);
  }
  SUBCASE("null calibration") {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> n(0.0, 1.0);
    int rejections = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      std::vector<double> a(20), b(20);
      for (int i = 0; i < 20; ++i) {
        a[i] = n(rng);
        b[i] = n(rng);
      }
      if (paired_t_test(a, b).p < 0.05) ++rejections;
    }
    CHECK(rejections >= 30);
    CHECK(rejections <= 70);
  }
}

TEST_CASE("spearman") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  CHECK(spearman_rho(x, std::vector<double>{2, 4, 6, 8, 100}) == doctest::Approx(1.0));
  CHECK(spearman_rho(x, std::vector<double>{5, 4, 3, 2, 1}) == doctest::Approx(-1.0));
  // Ties take average ranks: y ranks = [1.5, 1.5, 3, 4, 5].
  const double rho = spearman_rho(x, std::vector<double>{1, 1, 2, 3, 4});
  CHECK(rho == doctest::Approx(0.9746794344808963).epsilon(1e-12));
  CHECK_THROWS_AS(spearman_rho(x, std::vector<double>{1, 1, 1, 1, 1}), DegenerateError);
}
