#include "specklediff/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "specklediff/errors.hpp"
#include "specklediff/preprocess.hpp"
#include "specklediff/random.hpp"

namespace specklediff {

std::string to_string(SpeckleModel m) {
  return m == SpeckleModel::gamma_multiplicative ? "gamma_multiplicative" : "gaussian_additive";
}

SpeckleModel speckle_model_from_string(const std::string& s) {
  if (s == "gamma_multiplicative" || s == "gamma") return SpeckleModel::gamma_multiplicative;
  if (s == "gaussian_additive" || s == "gaussian") return SpeckleModel::gaussian_additive;
  throw ConfigError("unknown speckle model '" + s + "'");
}

void PhantomSpec::validate() const {
  if (height < 16 || width < 16) throw ConfigError("phantom must be at least 16x16");
  if (layers < 1) throw ConfigError("phantom needs at least one layer");
  if (!levels.empty() && static_cast<int>(levels.size()) != layers)
    throw ConfigError("phantom levels must list one intensity per layer");
  for (double v : layer_levels())
    if (v < 0.0 || v > 1.0) throw ConfigError("phantom layer levels must lie in [0, 1]");
  for (double v : {background_level, deep_level, vessel_level})
    if (v < 0.0 || v > 1.0) throw ConfigError("phantom levels must lie in [0, 1]");
  if (vessels < 0 || undulation < 0.0) throw ConfigError("phantom vessel count and undulation must be >= 0");
  if (!no_noise) {
    if (speckle == SpeckleModel::gamma_multiplicative && !(gamma_shape > 0.0))
      throw ConfigError("gamma speckle shape must be positive");
    if (speckle == SpeckleModel::gaussian_additive && !(gaussian_sigma > 0.0))
      throw ConfigError("gaussian speckle sigma must be positive");
  }
}

std::vector<double> PhantomSpec::layer_levels() const {
  if (!levels.empty()) return levels;
  static constexpr double pattern[] = {0.55, 0.3, 0.7, 0.4, 0.6, 0.35};
  std::vector<double> out;
  for (int k = 0; k < layers; ++k) out.push_back(pattern[k % 6]);
  return out;
}

namespace {

struct Vessel {
  double cx, rx, ry;
};

struct Geometry {
  std::vector<double> bounds;  // layers + 1 boundary rows, before undulation
  double phase = 0.0;
  double cycles = 1.0;
  int vessel_layer = 0;
  std::vector<Vessel> vessels;
};

Geometry build_geometry(const PhantomSpec& spec) {
  Rng rng(derive_seed(spec.seed, 0));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double H = spec.height;
  const double top = H * (0.22 + 0.06 * (u(rng) - 0.5));
  const double bottom = H * (0.85 + 0.06 * (u(rng) - 0.5));
  std::vector<double> w(static_cast<std::size_t>(spec.layers));
  double total = 0.0;
  for (auto& v : w) total += (v = 1.0 + 0.5 * (u(rng) - 0.5));
  Geometry g;
  g.bounds.push_back(top);
  for (double v : w) g.bounds.push_back(g.bounds.back() + (bottom - top) * v / total);
  g.phase = 2.0 * std::numbers::pi * u(rng);
  g.cycles = 0.5 + u(rng);
  g.vessel_layer = 0;
  const double thick = g.bounds[1] - g.bounds[0];
  for (int i = 0; i < spec.vessels; ++i) {
    Vessel v;
    v.cx = spec.width * (0.1 + 0.8 * u(rng));
    v.rx = 1.5 + 1.5 * u(rng);
    v.ry = std::max(1.0, (0.2 + 0.15 * u(rng)) * thick);
    g.vessels.push_back(v);
  }
  return g;
}

double offset(const PhantomSpec& spec, const Geometry& g, double phase, double xc) {
  return spec.undulation * std::sin(2.0 * std::numbers::pi * g.cycles * xc / spec.width + phase);
}

Image render(const PhantomSpec& spec, const Geometry& g, double phase) {
  const auto levels = spec.layer_levels();
  Image img(spec.height, spec.width);
  const int L = spec.layers;
  for (int x = 0; x < spec.width; ++x) {
    const double xc = x + 0.5;
    const double off = offset(spec, g, phase, xc);
    for (int y = 0; y < spec.height; ++y) {
      const double yc = y + 0.5;
      double v;
      if (yc < g.bounds[0] + off) {
        v = spec.background_level;
      } else if (yc >= g.bounds[static_cast<std::size_t>(L)] + off) {
        v = spec.deep_level;
      } else {
        int k = 0;
        while (k + 1 < L && yc >= g.bounds[static_cast<std::size_t>(k + 1)] + off) ++k;
        v = levels[static_cast<std::size_t>(k)];
      }
      const double mid = 0.5 * (g.bounds[static_cast<std::size_t>(g.vessel_layer)] +
                                g.bounds[static_cast<std::size_t>(g.vessel_layer + 1)]) + off;
      for (const auto& ves : g.vessels) {
        const double dx = (xc - ves.cx) / ves.rx, dy = (yc - mid) / ves.ry;
        if (dx * dx + dy * dy <= 1.0) v = spec.vessel_level;
      }
      img(y, x) = static_cast<float>(v);
    }
  }
  return img;
}

ROISet phantom_rois(const PhantomSpec& spec, const Geometry& g) {
  ROISet rois;
  const int margin_x = 2;
  const int w = spec.width - 2 * margin_x;
  const double A = spec.undulation;
  const int bg_end = static_cast<int>(std::floor(g.bounds[0] - A)) - 1;
  if (bg_end - 1 >= 2) rois.background.push_back({1, margin_x, bg_end - 1, w});

  const auto levels = spec.layer_levels();
  int best = -1;
  for (int k = 0; k < spec.layers; ++k) {
    if (k == g.vessel_layer && spec.vessels > 0) continue;
    const int y0 = static_cast<int>(std::ceil(g.bounds[static_cast<std::size_t>(k)] + A)) + 1;
    const int y1 = static_cast<int>(std::floor(g.bounds[static_cast<std::size_t>(k + 1)] - A)) - 1;
    if (y1 - y0 < 2) continue;
    const Rect r{y0, margin_x, y1 - y0, w};
    rois.homogeneous.push_back(r);
    if (best < 0 || levels[static_cast<std::size_t>(k)] > levels[static_cast<std::size_t>(best)]) {
      best = k;
      rois.foreground = {r};
    }
  }
  return rois;
}

}  // namespace

Image apply_speckle(const Image& clean, const PhantomSpec& spec, std::uint64_t noise_seed) {
  if (spec.no_noise) return clean;
  Rng rng(noise_seed);
  Image out(clean.height(), clean.width());
  if (spec.speckle == SpeckleModel::gamma_multiplicative) {
    std::gamma_distribution<double> gamma(spec.gamma_shape, 1.0 / spec.gamma_shape);
    for (std::size_t i = 0; i < clean.size(); ++i)
      out[i] = static_cast<float>(std::clamp(clean[i] * gamma(rng), 0.0, 1.0));
  } else {
    std::normal_distribution<double> normal(0.0, spec.gaussian_sigma);
    for (std::size_t i = 0; i < clean.size(); ++i)
      out[i] = static_cast<float>(std::clamp(clean[i] + normal(rng), 0.0, 1.0));
  }
  return out;
}

Phantom make_phantom(const PhantomSpec& spec) {
  spec.validate();
  const Geometry g = build_geometry(spec);
  const Image clean = render(spec, g, g.phase);
  const Image noisy = apply_speckle(clean, spec, derive_seed(spec.seed, 1));
  return {normalize_range(clean, 0.0f, 1.0f), normalize_range(noisy, 0.0f, 1.0f), phantom_rois(spec, g)};
}

PhantomVolume make_phantom_volume(const PhantomSpec& spec, int slices, double drift) {
  spec.validate();
  if (slices < 1) throw ConfigError("phantom volume needs at least one slice");
  const Geometry g = build_geometry(spec);
  PhantomVolume out;
  out.rois = phantom_rois(spec, g);
  for (int s = 0; s < slices; ++s) {
    const Image clean = render(spec, g, g.phase + drift * s);
    const Image noisy = apply_speckle(clean, spec, derive_seed(spec.seed, 1000 + static_cast<std::uint64_t>(s)));
    out.clean.slices.push_back(normalize_range(clean, 0.0f, 1.0f));
    out.noisy.slices.push_back(normalize_range(noisy, 0.0f, 1.0f));
  }
  out.noisy.source = out.clean.source = "phantom seed " + std::to_string(spec.seed);
  return out;
}

}  // namespace specklediff
