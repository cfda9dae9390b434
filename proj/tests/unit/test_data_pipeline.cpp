#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "specklediff/errors.hpp"
#include "specklediff/io.hpp"
#include "specklediff/manifest.hpp"
#include "specklediff/phantom.hpp"
#include "specklediff/preprocess.hpp"

using namespace specklediff;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "specklediff_data_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("normalize") {
  Image a(2, 2, std::vector<float>{0.0f, 255.0f, 127.5f, 51.0f});
  const Image n = normalize(a);
  CHECK(n[0] == -1.0f);
  CHECK(n[1] == 1.0f);
  CHECK(n[2] == doctest::Approx(0.0f));
  const Image mid = normalize(Image(1, 3, std::vector<float>{10.0f, 15.0f, 20.0f}));
  CHECK(mid[1] == 0.0f);
  const Image already = oracle::random_image(8, 8, 1);
  Image stretched = already;
  stretched[0] = -1.0f;
  stretched[1] = 1.0f;
  CHECK(max_abs_diff(normalize(stretched), stretched) <= 1e-6);
  CHECK(max_abs_diff(normalize(normalize(stretched)), normalize(stretched)) <= 1e-6);
  CHECK_THROWS_AS(normalize(Image(3, 3, 0.4f)), DegenerateError);

  const Image r = normalize_range(Image(1, 3, std::vector<float>{-0.5f, 0.25f, 2.0f}), 0.0f, 1.0f);
  CHECK(r[0] == -1.0f);
  CHECK(r[1] == -0.5f);
  CHECK(r[2] == 1.0f);
  CHECK(denormalize_range(Image(1, 1, 0.0f), 0.0f, 255.0f)[0] == 127.5f);
}

TEST_CASE("volume normalization uses one global map") {
  Volume v;
  v.slices.push_back(Image(2, 2, 0.0f));
  v.slices.push_back(Image(2, 2, 10.0f));
  const Volume n = normalize_volume(v);
  CHECK(n.slices[0][0] == -1.0f);
  CHECK(n.slices[1][0] == 1.0f);
}

TEST_CASE("pad to square") {
  const Image img = oracle::random_image(512, 500, 2);
  const Padded p = pad_to_square(img, 512);
  CHECK(p.image.height() == 512);
  CHECK(p.image.width() == 512);
  CHECK(p.crop == CropInfo{0, 6, 512, 500});
  for (int y = 0; y < 512; ++y) {
    for (int x = 0; x < 6; ++x) CHECK(p.image(y, x) == -1.0f);
    for (int x = 506; x < 512; ++x) CHECK(p.image(y, x) == -1.0f);
  }
  CHECK(crop(p.image, p.crop) == img);
  const Image sq = oracle::random_image(64, 64, 3);
  CHECK(pad_to_square(sq, 64).image == sq);
  const Padded odd = pad_to_square(oracle::random_image(5, 8, 4), 8);
  CHECK(odd.crop == CropInfo{1, 0, 5, 8});
  CHECK(crop(odd.image, odd.crop) == oracle::random_image(5, 8, 4));
  CHECK_THROWS_AS(pad_to_square(img, 500), SizeError);
}

TEST_CASE("repeat averaging") {
  const Image a = oracle::random_image(4, 4, 5);
  CHECK(average_repeats({a, a, a}) == a);
  CHECK(average_repeats({Image(2, 2, 0.0f), Image(2, 2, 1.0f)}) == Image(2, 2, 0.5f));
  CHECK_THROWS_AS(average_repeats({a}), ContractError);
  CHECK_THROWS_AS(average_repeats({a, Image(4, 5)}), ContractError);

  std::vector<Image> frames;
  for (int k = 0; k < 5; ++k) frames.push_back(oracle::random_image(6, 6, 10 + k));
  std::vector<Image> perm{frames[3], frames[0], frames[4], frames[2], frames[1]};
  CHECK(max_abs_diff(average_repeats(frames), average_repeats(perm)) <= 1e-6);

  const Image clean = oracle::random_image(64, 64, 6);
  std::mt19937_64 rng(7);
  std::normal_distribution<float> n(0.0f, 0.2f);
  std::vector<Image> noisy;
  for (int k = 0; k < 5; ++k) {
    Image f = clean;
    for (auto& v : f.pixels()) v += n(rng);
    noisy.push_back(f);
  }
  std::vector<double> single, avg;
  const Image m = average_repeats(noisy);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    single.push_back(noisy[0][i] - clean[i]);
    avg.push_back(m[i] - clean[i]);
  }
  CHECK(oracle::sample_variance(avg) / oracle::sample_variance(single) == doctest::Approx(0.2).epsilon(0.1));

  Volume v;
  for (int k = 0; k < 6; ++k) v.slices.push_back(Image(2, 2, static_cast<float>(k)));
  v.repeats_per_location = 3;
  const Volume g = average_volume_repeats(v);
  REQUIRE(g.size() == 2u);
  CHECK(g.slices[0][0] == 1.0f);
  CHECK(g.slices[1][0] == 4.0f);
}

TEST_CASE("phantom generation") {
  PhantomSpec spec;
  spec.seed = 5;
  const Phantom a = make_phantom(spec), b = make_phantom(spec);
  CHECK(a.clean == b.clean);
  CHECK(a.noisy == b.noisy);
  CHECK(a.rois == b.rois);
  CHECK(a.clean.min() >= -1.0f);
  CHECK(a.noisy.max() <= 1.0f);
  CHECK_FALSE(a.noisy == a.clean);
  CHECK_NOTHROW(a.rois.validate_for(a.clean));
  CHECK_FALSE(a.rois.background.empty());
  CHECK_FALSE(a.rois.foreground.empty());
  CHECK_FALSE(a.rois.homogeneous.empty());
  for (const auto& r : a.rois.homogeneous) {
    const float v0 = a.clean(r.y, r.x);
    for (int y = r.y; y < r.y + r.height; ++y)
      for (int x = r.x; x < r.x + r.width; ++x) CHECK(a.clean(y, x) == v0);
  }
  spec.seed = 6;
  CHECK_FALSE(make_phantom(spec).noisy == a.noisy);

  PhantomSpec quiet = spec;
  quiet.no_noise = true;
  const Phantom q = make_phantom(quiet);
  CHECK(q.noisy == q.clean);

  PhantomSpec bad;
  bad.gamma_shape = 0.0;
  CHECK_THROWS_AS(make_phantom(bad), ConfigError);
  bad = PhantomSpec{};
  bad.levels = {0.5, 1.5, 0.2, 0.1};
  CHECK_THROWS_AS(make_phantom(bad), ConfigError);
  bad = PhantomSpec{};
  bad.height = 8;
  CHECK_THROWS_AS(make_phantom(bad), ConfigError);
  CHECK(speckle_model_from_string(to_string(SpeckleModel::gaussian_additive)) == SpeckleModel::gaussian_additive);
}

TEST_CASE("gamma speckle moments") {
  // Level 0.1 keeps clipping at 1 out of play (P < 1e-4 for k = 1).
  for (double k : {1.0, 4.0}) {
    PhantomSpec spec;
    spec.gamma_shape = k;
    const Image speckled = apply_speckle(Image(256, 256, 0.1f), spec, 3);
    std::vector<double> v(speckled.pixels().begin(), speckled.pixels().end());
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    const double sd = std::sqrt(oracle::sample_variance(v));
    CAPTURE(k);
    CHECK(m == doctest::Approx(0.1).epsilon(0.02));
    CHECK(sd == doctest::Approx(0.1 / std::sqrt(k)).epsilon(0.03));
    CHECK(m * m / (sd * sd) == doctest::Approx(k).epsilon(0.06));
  }
  PhantomSpec g;
  g.speckle = SpeckleModel::gaussian_additive;
  g.gaussian_sigma = 0.05;
  const Image noisy = apply_speckle(Image(128, 128, 0.5f), g, 1);
  std::vector<double> v(noisy.pixels().begin(), noisy.pixels().end());
  CHECK(std::sqrt(oracle::sample_variance(v)) == doctest::Approx(0.05).epsilon(0.03));
}

TEST_CASE("phantom volumes") {
  PhantomSpec spec;
  spec.seed = 2;
  const auto pv = make_phantom_volume(spec, 5);
  CHECK(pv.clean.size() == 5u);
  CHECK_NOTHROW(pv.noisy.validate());
  CHECK_FALSE(pv.noisy.slices[0] == pv.noisy.slices[1]);
  CHECK(mse(pv.clean.slices[0], pv.clean.slices[1]) < 0.05);
  CHECK_THROWS_AS(make_phantom_volume(spec, 0), ConfigError);
}

TEST_CASE("raw container round trip is bit-exact") {
  std::vector<Image> slices{oracle::random_image(7, 5, 1), oracle::gaussian_image(7, 5, 2)};
  slices[1][3] = -0.0f;
  slices[1][4] = 1e-38f;
  const fs::path p = scratch("a.raw");
  save_raw(slices, p.string());
  const auto back = load_raw(p.string());
  REQUIRE(back.size() == 2u);
  for (int k = 0; k < 2; ++k)
    CHECK(std::memcmp(back[k].data().data(), slices[k].data().data(), slices[k].size() * sizeof(float)) == 0);
  const std::string bytes = file_bytes(p);
  CHECK(bytes.starts_with(
      R"({"dtype":"float32","endianness":"little","format":"specklediff-raw","shape":[2,7,5],"version":1})"
      "\n"));
  CHECK(bytes.size() == bytes.find('\n') + 1 + 2 * 7 * 5 * 4);
  save_raw(slices, scratch("b.raw").string());
  CHECK(file_bytes(scratch("b.raw")) == bytes);

  std::ofstream(scratch("short.raw"), std::ios::binary) << bytes.substr(0, bytes.size() - 4);
  CHECK_THROWS_AS(load_raw(scratch("short.raw").string()), IoError);
  CHECK_THROWS_AS(load_raw(scratch("absent.raw").string()), IoError);
}

TEST_CASE("16-bit png and tiff round trips are quantization-bounded") {
  const Image img = oracle::random_image(33, 17, 3);
  const fs::path png = scratch("a.png");
  save_png16(img, png.string());
  const Image back = load_png(png.string());
  CHECK(back.same_shape(img));
  CHECK(max_abs_diff(back, img) <= 2.0 / 65535.0 * 0.5 + 1e-7);

  const Image wide = oracle::random_image(9, 9, 4, 0.0f, 255.0f);
  save_png16(wide, scratch("w.png").string(), 0.0f, 255.0f);
  CHECK(max_abs_diff(load_png(scratch("w.png").string(), 0.0f, 255.0f), wide) <= 255.0 / 65535.0);

  const std::vector<Image> pages{oracle::random_image(12, 10, 5), oracle::random_image(12, 10, 6)};
  save_tiff16(pages, scratch("s.tif").string());
  const auto tp = load_tiff(scratch("s.tif").string());
  REQUIRE(tp.size() == 2u);
  for (int k = 0; k < 2; ++k) CHECK(max_abs_diff(tp[k], pages[k]) <= 1.0 / 65535.0 + 1e-7);

  std::ofstream(scratch("junk.png")) << "not an image";
  CHECK_THROWS_AS(load_png(scratch("junk.png").string()), IoError);
  CHECK_THROWS_AS(load_tiff(scratch("junk.png").string()), IoError);
}

TEST_CASE("load_volume from a directory sorts lexicographically") {
  const fs::path dir = scratch("stack");
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<Image> slices;
  for (int k = 9; k >= 0; --k) {
    Image s(8, 8, -1.0f + 0.2f * static_cast<float>(k));
    char name[32];
    std::snprintf(name, sizeof name, "bscan_%03d.png", k);
    save_png16(s, (dir / name).string());
  }
  std::ofstream(dir / "notes.txt") << "ignored";
  VolumeLayout layout;
  layout.repeats_per_location = 5;
  layout.snr_label = "96dB";
  const Volume v = load_volume(dir.string(), layout);
  REQUIRE(v.size() == 10u);
  for (int k = 0; k < 10; ++k)
    CHECK(v.slices[static_cast<std::size_t>(k)][0] == doctest::Approx(-1.0f + 0.2f * k).epsilon(1e-4));
  CHECK(v.repeats_per_location == 5);
  CHECK(v.snr_label == std::optional<std::string>("96dB"));

  save_png16(Image(4, 4), (dir / "bscan_010.png").string());
  CHECK_THROWS_AS(load_volume(dir.string()), IoError);
  CHECK_THROWS_AS(load_volume(scratch("nope").string()), IoError);

  Volume r;
  r.slices = {oracle::random_image(4, 4, 1), oracle::random_image(4, 4, 2)};
  save_volume(r, scratch("vol.raw").string());
  CHECK(load_volume(scratch("vol.raw").string()).slices == r.slices);
  save_volume(r, scratch("vol.tiff").string());
  CHECK(load_volume(scratch("vol.tiff").string()).size() == 2u);
}

TEST_CASE("dataset manifest round trip") {
  DatasetManifest m;
  DatasetEntry e;
  e.id = "p000";
  e.noisy = "noisy/p000.raw";
  e.clean = "clean/p000.raw";
  e.rois = "rois/p000.json";
  e.repeats_per_location = 5;
  e.snr_label = "101dB";
  m.entries.push_back(e);
  DatasetEntry t;
  t.id = "p001";
  t.role = "test";
  t.noisy = "/abs/p001.raw";
  m.entries.push_back(t);
  const fs::path p = scratch("manifest.json");
  save_manifest(m, p.string());
  const DatasetManifest back = load_manifest(p.string());
  REQUIRE(back.entries.size() == 2u);
  CHECK(back.entries[0].clean == e.clean);
  CHECK(back.entries[0].snr_label == e.snr_label);
  CHECK(back.entries[0].repeats_per_location == 5);
  CHECK(back.entries[1].role == "test");
  CHECK(back.with_role("test").size() == 1u);
  CHECK(back.resolve("noisy/p000.raw") == (p.parent_path() / "noisy/p000.raw").string());
  CHECK(back.resolve("/abs/p001.raw") == "/abs/p001.raw");
  std::ofstream(scratch("bad_manifest.json")) << R"({"format":"other","entries":[]})";
  CHECK_THROWS(load_manifest(scratch("bad_manifest.json").string()));
}

TEST_CASE("roi sidecar round trip") {
  ROISet r;
  r.background = {{1, 2, 3, 4}};
  r.foreground = {{5, 6, 7, 8}};
  r.homogeneous = {{5, 6, 7, 8}, {20, 2, 3, 10}};
  save_rois(r, scratch("rois.json").string());
  CHECK(load_rois(scratch("rois.json").string()) == r);
  ROISet outside;
  outside.background = {{0, 0, 10, 10}};
  CHECK_THROWS_AS(outside.validate_for(Image(8, 8)), ContractError);
}
