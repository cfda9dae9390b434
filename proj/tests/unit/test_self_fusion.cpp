#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "specklediff/errors.hpp"
#include "specklediff/phantom.hpp"
#include "specklediff/self_fusion.hpp"

using namespace specklediff;

namespace {

// Zero-filled shift: out(y, x) = img(y - dy, x - dx).
Image shifted_zero_fill(const Image& img, int dy, int dx) {
  Image out(img.height(), img.width(), 0.0f);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const int sy = y - dy, sx = x - dx;
      if (sy >= 0 && sx >= 0 && sy < img.height() && sx < img.width()) out(y, x) = img(sy, sx);
    }
  return out;
}

Image clean_phantom(std::uint64_t seed) {
  PhantomSpec s;
  s.no_noise = true;
  s.seed = seed;
  return make_phantom(s).clean;
}

Image textured(int h, int w, std::uint64_t seed) {
  // Smooth random texture so correlation has a unique peak.
  const Image r = oracle::random_image(h, w, seed);
  Image out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      int n = 0;
      for (int a = -1; a <= 1; ++a)
        for (int b = -1; b <= 1; ++b) {
          const int yy = y + a, xx = x + b;
          if (yy >= 0 && xx >= 0 && yy < h && xx < w) {
            s += r(yy, xx);
            ++n;
          }
        }
      out(y, x) = static_cast<float>(s / n);
    }
  return out;
}

}  // namespace

TEST_CASE("registration method names") {
  for (auto m : {RegistrationMethod::none, RegistrationMethod::translation, RegistrationMethod::external})
    CHECK(registration_method_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(registration_method_from_string("greedy"), ConfigError);
}

TEST_CASE("translation registration") {
  const Image x = clean_phantom(3);
  SUBCASE("identity") {
    const auto r = register_image(x, x, RegistrationMethod::translation);
    CHECK(r.dy == 0);
    CHECK(r.dx == 0);
    CHECK(r.image == x);
  }
  SUBCASE("known shift on a phantom") {
    const Image moved = shifted_zero_fill(x, 3, -2);
    const auto r = register_image(moved, x, RegistrationMethod::translation);
    CHECK(r.dy == 3);
    CHECK(r.dx == -2);
  }
  SUBCASE("agrees with exhaustive search") {
    const Image base = textured(40, 40, 8);
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> d(-5, 5);
    for (int k = 0; k < 12; ++k) {
      const int dy = d(rng), dx = d(rng);
      const Image moved = shifted_zero_fill(base, dy, dx);
      const auto expect = oracle::exhaustive_shift(moved, base, 5);
      CHECK(expect == std::pair<int, int>{dy, dx});
      CHECK(estimate_translation(moved, base, 5) == expect);
    }
  }
  SUBCASE("registered interior matches the target") {
    const Image moved = shifted_zero_fill(x, -2, 4);
    const auto r = register_image(moved, x, RegistrationMethod::translation);
    for (int y = 5; y < x.height() - 5; ++y)
      for (int c = 5; c < x.width() - 5; ++c) CHECK(r.image(y, c) == x(y, c));
  }
  SUBCASE("none returns moving unchanged") {
    const Image y = clean_phantom(4);
    CHECK(register_image(x, y, RegistrationMethod::none).image == x);
  }
  CHECK_THROWS_AS(register_image(x, Image(8, 8), RegistrationMethod::none), ContractError);
}

TEST_CASE("external registration") {
  const Image moving = oracle::random_image(16, 16, 5);
  const Image fixed = oracle::random_image(16, 16, 6);
  RegistrationOptions opt;
  opt.external_command = "cp {moving} {out}";
  SUBCASE("raw exchange") {
    CHECK(register_image(moving, fixed, RegistrationMethod::external, opt).image == moving);
  }
  SUBCASE("png exchange") {
    opt.external_format = "png";
    const auto r = register_image(moving, fixed, RegistrationMethod::external, opt);
    CHECK(max_abs_diff(r.image, moving) <= 2.0 / 65535.0 + 1e-7);
  }
  SUBCASE("fixed image placeholder") {
    opt.external_command = "cp {fixed} {out}";
    CHECK(register_image(moving, fixed, RegistrationMethod::external, opt).image == fixed);
  }
  SUBCASE("failure carries diagnostics") {
    opt.external_command = "sh -c 'echo registration-exploded >&2; exit 3'";
    try {
      register_image(moving, fixed, RegistrationMethod::external, opt);
      FAIL("expected RegistrationError");
    } catch (const RegistrationError& e) {
      CHECK(std::string(e.what()).find("registration-exploded") != std::string::npos);
    }
  }
  SUBCASE("missing command") {
    opt.external_command.clear();
    CHECK_THROWS_AS(register_image(moving, fixed, RegistrationMethod::external, opt), RegistrationError);
  }
}

TEST_CASE("similarity weights") {
  const Image a = oracle::random_image(8, 8, 1);
  CHECK(similarity_weight(a, a, 0.3) == 1.0);
  Image b = a;
  for (auto& v : b.pixels()) v += 0.5f;
  CHECK(similarity_weight(a, b, mse(a, b)) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK_THROWS_AS(similarity_weight(a, b, 0.0), ConfigError);

  std::vector<std::pair<double, double>> pairs;
  for (int k = 0; k < 100; ++k) {
    const Image p = oracle::random_image(8, 8, 1000 + k), q = oracle::random_image(8, 8, 2000 + k, -0.3f, 0.3f);
    double m = 0;
    for (std::size_t i = 0; i < p.size(); ++i) m += (p[i] - q[i]) * static_cast<double>(p[i] - q[i]);
    pairs.emplace_back(m / static_cast<double>(p.size()), similarity_weight(p, q, 0.5));
  }
  for (const auto& u : pairs)
    for (const auto& v : pairs)
      if (u.first < v.first) CHECK(u.second >= v.second);
}

TEST_CASE("fusion of identical and constant volumes") {
  Volume v;
  const Image s = clean_phantom(9);
  v.slices.assign(6, s);
  FusionConfig cfg;
  for (int i = 0; i < 6; ++i) CHECK(fuse(v, i, cfg) == s);
  Volume c;
  c.slices.assign(4, Image(8, 8, 0.25f));
  CHECK(fuse(c, 1, cfg) == Image(8, 8, 0.25f));
}

TEST_CASE("uniform-weight fusion divides iid noise variance by the window size") {
  const int H = 32, W = 32, n = 9;
  const Image base = oracle::random_image(H, W, 77, -0.5f, 0.5f);
  std::mt19937_64 rng(5);
  std::normal_distribution<float> noise(0.0f, 0.1f);
  Volume v;
  for (int k = 0; k < n; ++k) {
    Image s = base;
    for (auto& p : s.pixels()) p += noise(rng);
    v.slices.push_back(s);
  }
  FusionConfig cfg;
  cfg.radius = 3;
  cfg.registration = RegistrationMethod::none;
  cfg.bandwidth = 1e12;
  const Image fused = fuse(v, 4, cfg);
  std::vector<double> in_res, out_res;
  for (std::size_t i = 0; i < base.size(); ++i) {
    in_res.push_back(v.slices[4][i] - base[i]);
    out_res.push_back(fused[i] - base[i]);
  }
  const double ratio = oracle::sample_variance(out_res) / oracle::sample_variance(in_res);
  CHECK(ratio == doctest::Approx(1.0 / 7.0).epsilon(0.15));
}

TEST_CASE("window truncation at the volume ends") {
  // Slices carry distinct constants; uniform weights expose which ones were used.
  Volume v;
  for (int k = 0; k < 8; ++k) v.slices.push_back(Image(4, 4, static_cast<float>(k)));
  FusionConfig cfg;
  cfg.registration = RegistrationMethod::none;
  cfg.bandwidth = 1e12;
  CHECK(fuse(v, 0, cfg)[0] == doctest::Approx((0 + 1 + 2 + 3) / 4.0));
  CHECK(fuse(v, 7, cfg)[0] == doctest::Approx((4 + 5 + 6 + 7) / 4.0));
  CHECK(fuse(v, 4, cfg)[0] == doctest::Approx((1 + 2 + 3 + 4 + 5 + 6 + 7) / 7.0));
}

TEST_CASE("fusion is a convex combination") {
  PhantomSpec spec;
  spec.seed = 12;
  const auto pv = make_phantom_volume(spec, 7);
  FusionConfig cfg;
  const Volume fused = fuse_volume(pv.noisy, cfg);
  REQUIRE(fused.size() == 7u);
  float lo = 1e9f, hi = -1e9f;
  for (const auto& s : pv.noisy.slices) {
    lo = std::min(lo, s.min());
    hi = std::max(hi, s.max());
  }
  for (const auto& s : fused.slices) {
    CHECK(s.min() >= lo);
    CHECK(s.max() <= hi);
  }
  for (int i = 0; i < 7; ++i) CHECK(fused.slices[static_cast<std::size_t>(i)] == fuse(pv.noisy, i, cfg));

  FusionConfig par = cfg;
  par.max_parallel = 3;
  const Volume fused_par = fuse_volume(pv.noisy, par);
  for (std::size_t i = 0; i < 7; ++i) CHECK(fused_par.slices[i] == fused.slices[i]);
}

TEST_CASE("fusion raises homogeneous-region SNR") {
  PhantomSpec spec;
  spec.seed = 13;
  const auto pv = make_phantom_volume(spec, 9);
  const Volume fused = fuse_volume(pv.noisy, FusionConfig{});
  for (const auto& r : pv.rois.homogeneous) {
    double in_snr = 0, out_snr = 0;
    for (int i = 2; i < 7; ++i) {
      auto stats = [&](const Image& img) {
        double s = 0, ss = 0;
        int n = 0;
        for (int y = r.y; y < r.y + r.height; ++y)
          for (int x = r.x; x < r.x + r.width; ++x) {
            const double v = (img(y, x) + 1.0) / 2.0;
            s += v;
            ss += v * v;
            ++n;
          }
        const double m = s / n;
        return m * m / (ss / n - m * m);
      };
      in_snr += stats(pv.noisy.slices[static_cast<std::size_t>(i)]);
      out_snr += stats(fused.slices[static_cast<std::size_t>(i)]);
    }
    CHECK(out_snr > in_snr);
  }
}

TEST_CASE("single-slice volumes and configuration") {
  Volume v;
  v.slices.push_back(oracle::random_image(8, 8, 2));
  CHECK(fuse(v, 0, FusionConfig{}) == v.slices[0]);
  CHECK(fuse_volume(v, FusionConfig{}).slices[0] == v.slices[0]);
  CHECK_THROWS_AS(fuse(v, 1, FusionConfig{}), IndexError);
  FusionConfig bad;
  bad.radius = 0;
  CHECK_THROWS_AS(fuse(v, 0, bad), ConfigError);
  bad = FusionConfig{};
  bad.bandwidth = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
