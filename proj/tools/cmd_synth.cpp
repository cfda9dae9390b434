#include <filesystem>
#include <iostream>
#include <memory>

#include "cli_common.hpp"
#include "commands.hpp"
#include "specklediff/io.hpp"
#include "specklediff/manifest.hpp"
#include "specklediff/phantom.hpp"
#include "specklediff/random.hpp"
#include "specklediff/rois.hpp"

namespace fs = std::filesystem;

namespace specklediff::cli {

namespace {

struct SynthOptions {
  std::string out_dir;
  int count = 20;
  int train_volumes = 0;
  int slices = 11;
  double drift = 0.05;
  std::string speckle = "gamma";
  PhantomSpec spec;
};

// Training volumes and held-out phantoms draw from disjoint seed streams.
constexpr std::uint64_t kTrainStream = 1ull << 32;

void run(const SynthOptions& o) {
  PhantomSpec base = o.spec;
  base.speckle = speckle_model_from_string(o.speckle);
  base.validate();
  if (o.count < 0 || o.train_volumes < 0) throw UsageError("--count and --train-volumes must be >= 0");
  if (o.count + o.train_volumes == 0) throw UsageError("nothing to synthesize: --count and --train-volumes are both 0");
  if (o.train_volumes > 0 && o.slices < 1) throw UsageError("--slices must be >= 1");

  fs::create_directories(fs::path(o.out_dir) / "train");
  fs::create_directories(fs::path(o.out_dir) / "test");
  DatasetManifest manifest;
  const std::uint64_t seed = base.seed;

  for (int v = 0; v < o.train_volumes; ++v) {
    PhantomSpec s = base;
    s.seed = derive_seed(seed, kTrainStream + static_cast<std::uint64_t>(v));
    const PhantomVolume pv = make_phantom_volume(s, o.slices, o.drift);
    const std::string id = indexed_name("vol_", static_cast<std::size_t>(v));
    DatasetEntry e;
    e.id = id;
    e.role = "train";
    e.noisy = "train/" + id + "_noisy.raw";
    e.clean = "train/" + id + "_clean.raw";
    e.rois = "train/" + id + "_rois.json";
    save_volume(pv.noisy, (fs::path(o.out_dir) / e.noisy).string());
    save_volume(pv.clean, (fs::path(o.out_dir) / *e.clean).string());
    save_rois(pv.rois, (fs::path(o.out_dir) / *e.rois).string());
    manifest.entries.push_back(std::move(e));
  }
  for (int k = 0; k < o.count; ++k) {
    PhantomSpec s = base;
    s.seed = derive_seed(seed, static_cast<std::uint64_t>(k));
    const Phantom ph = make_phantom(s);
    const std::string id = indexed_name("ph_", static_cast<std::size_t>(k));
    DatasetEntry e;
    e.id = id;
    e.role = "test";
    e.noisy = "test/" + id + "_noisy.raw";
    e.clean = "test/" + id + "_clean.raw";
    e.rois = "test/" + id + "_rois.json";
    save_raw({ph.noisy}, (fs::path(o.out_dir) / e.noisy).string());
    save_raw({ph.clean}, (fs::path(o.out_dir) / *e.clean).string());
    save_rois(ph.rois, (fs::path(o.out_dir) / *e.rois).string());
    manifest.entries.push_back(std::move(e));
  }
  const std::string manifest_path = (fs::path(o.out_dir) / "manifest.json").string();
  save_manifest(manifest, manifest_path);
  std::cout << "synth: " << o.train_volumes << " training volumes x " << o.slices << " slices, " << o.count
            << " test phantoms -> " << manifest_path << '\n';
}

}  // namespace

Action add_synth(CLI::App& root) {
  auto o = std::make_shared<SynthOptions>();
  CLI::App* sub = root.add_subcommand("synth", "Generate a synthetic speckle phantom dataset and its manifest");
  sub->add_option("--out", o->out_dir, "Output directory")->required();
  sub->add_option("--count", o->count, "Held-out single-image phantoms (role test)")->capture_default_str();
  sub->add_option("--train-volumes", o->train_volumes, "Training volumes (role train)")->capture_default_str();
  sub->add_option("--slices", o->slices, "Slices per training volume")->capture_default_str();
  sub->add_option("--drift", o->drift, "Undulation phase drift per slice, radians")->capture_default_str();
  sub->add_option("--seed", o->spec.seed, "Base seed")->capture_default_str();

  PhantomSpec& s = o->spec;
  sub->add_option("--height", s.height, "Phantom height")->capture_default_str();
  sub->add_option("--width", s.width, "Phantom width")->capture_default_str();
  sub->add_option("--layers", s.layers, "Number of tissue layers")->capture_default_str();
  sub->add_option("--levels", s.levels, "Per-layer intensities in [0, 1], top to bottom")->delimiter(',');
  sub->add_option("--background-level", s.background_level, "Intensity above the top layer")->capture_default_str();
  sub->add_option("--deep-level", s.deep_level, "Intensity below the last layer")->capture_default_str();
  sub->add_option("--vessel-level", s.vessel_level, "Vessel intensity")->capture_default_str();
  sub->add_option("--vessels", s.vessels, "Vessel count")->capture_default_str();
  sub->add_option("--undulation", s.undulation, "Boundary undulation amplitude, pixels")->capture_default_str();
  sub->add_option("--speckle", o->speckle, "Noise model")
      ->check(CLI::IsMember({"gamma", "gaussian", "gamma_multiplicative", "gaussian_additive"}))
      ->capture_default_str();
  sub->add_option("--gamma-shape", s.gamma_shape, "Gamma speckle shape k (unit mean)")->capture_default_str();
  sub->add_option("--gaussian-sigma", s.gaussian_sigma, "Additive Gaussian sigma")->capture_default_str();
  sub->add_flag("--no-noise", s.no_noise, "Write clean phantoms as the noisy images");
  return [o] { run(*o); };
}

}  // namespace specklediff::cli
