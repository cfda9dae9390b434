#include <filesystem>
#include <iostream>
#include <memory>

#include "commands.hpp"
#include "inference.hpp"
#include "specklediff/checkpoint.hpp"
#include "specklediff/io.hpp"
#include "specklediff/manifest.hpp"
#include "specklediff/random.hpp"
#include "specklediff/sampler.hpp"

namespace fs = std::filesystem;

namespace specklediff::cli {

namespace {

struct DenoiseOptions {
  InferenceOptions inf;
  std::string input;
  std::string manifest;
  std::string role = "test";
  std::string out;
  std::string format = "raw";
  int t = -1;
  bool deterministic = false;
};

// Slice s of any input runs on the stream derive_seed(seed, s), so a file gives
// the same result whether it is denoised alone or as part of a manifest.
Volume denoise_volume(const Volume& in, const Checkpoint& ckpt, const DenoiseOptions& o) {
  const EpsFn model = as_eps_fn(ckpt.model);
  Volume out = in;
  for (std::size_t s = 0; s < in.size(); ++s) {
    Rng rng(derive_seed(o.inf.seed, s));
    out.slices[s] = with_padding(in.slices[s], o.inf.pad_to, [&](const Image& x) {
      return denoise(x, o.t, model, ckpt.schedule, rng, !o.deterministic);
    });
  }
  return out;
}

void ensure_parent(const std::string& path) {
  if (!fs::path(path).parent_path().empty()) fs::create_directories(fs::path(path).parent_path());
}

void run(const DenoiseOptions& o) {
  if (o.input.empty() == o.manifest.empty()) throw UsageError("give exactly one of --input or --manifest");
  const Checkpoint ckpt = load_checkpoint(o.inf.checkpoint);
  if (o.t < 0 || o.t > ckpt.schedule.T())
    throw UsageError("--t must lie in [0, " + std::to_string(ckpt.schedule.T()) + "]");

  if (!o.input.empty()) {
    const Volume out = denoise_volume(load_normalized(o.input, o.inf), ckpt, o);
    ensure_parent(o.out);
    save_volume(out, o.out);
    std::cout << "denoise: t = " << o.t << ", " << out.size() << " slices -> " << o.out << '\n';
    return;
  }

  const DatasetManifest m = load_manifest(o.manifest);
  const auto entries = m.with_role(o.role);
  if (entries.empty()) throw UsageError("manifest has no entries with role '" + o.role + "'");
  fs::create_directories(o.out);
  parallel_for(entries.size(), o.inf.jobs, [&](std::size_t i) {
    const DatasetEntry& e = *entries[i];
    const Volume in = load_normalized(m.resolve(e.noisy), o.inf, e.repeats_per_location);
    save_volume(denoise_volume(in, ckpt, o), (fs::path(o.out) / (e.id + "." + o.format)).string());
  });
  std::cout << "denoise: t = " << o.t << ", " << entries.size() << " entries -> " << o.out << '\n';
}

}  // namespace

Action add_denoise(CLI::App& root) {
  auto o = std::make_shared<DenoiseOptions>();
  CLI::App* sub = root.add_subcommand("denoise", "Run the reverse chain from step t on an image or a dataset");
  add_inference_options(*sub, o->inf);
  sub->add_option("--input", o->input, "Image or volume to denoise")->check(CLI::ExistingPath);
  sub->add_option("--manifest", o->manifest, "Dataset manifest; denoises every entry with --role")
      ->check(CLI::ExistingFile);
  sub->add_option("--role", o->role, "Manifest role to denoise")->capture_default_str();
  sub->add_option("--t", o->t, "Starting step; 0 returns the normalized input")->required();
  sub->add_option("--out", o->out, "Output file (format by extension) or directory with --manifest")->required();
  sub->add_option("--format", o->format, "File format for --manifest outputs")
      ->check(CLI::IsMember({"raw", "tif", "png"}))
      ->capture_default_str();
  sub->add_flag("--deterministic", o->deterministic, "Follow the posterior means without injecting noise");
  return [o] { run(*o); };
}

}  // namespace specklediff::cli
