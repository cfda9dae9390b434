#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>

#include "cli_common.hpp"
#include "commands.hpp"
#include "specklediff/io.hpp"
#include "specklediff/manifest.hpp"
#include "specklediff/preprocess.hpp"
#include "specklediff/self_fusion.hpp"

namespace fs = std::filesystem;

namespace specklediff::cli {

namespace {

struct SelffuseOptions {
  std::string input;
  std::string manifest;
  std::string out;
  std::string role = "train";
  std::string registration = "translation";
  std::string normalization = "auto";
  std::optional<double> bandwidth;
  FusionConfig fusion;
};

FusionConfig resolve_config(const SelffuseOptions& o) {
  FusionConfig c = o.fusion;
  c.registration = registration_method_from_string(o.registration);
  c.bandwidth = o.bandwidth;
  if (c.registration == RegistrationMethod::external && c.registration_options.external_command.empty()) {
    if (const char* env = std::getenv("SPECKLEDIFF_REGISTER_CMD")) c.registration_options.external_command = env;
    if (c.registration_options.external_command.empty())
      throw UsageError("external registration needs --external-command or SPECKLEDIFF_REGISTER_CMD");
  }
  c.validate();
  return c;
}

Volume fuse_file(const std::string& path, const FusionConfig& cfg, Normalization norm, int repeats) {
  VolumeLayout layout;
  layout.repeats_per_location = repeats;
  const Volume v = apply_normalization(average_volume_repeats(load_volume(path, layout)), norm);
  Volume fused = fuse_volume(v, cfg);
  fused.source = "self-fused " + path;
  return fused;
}

void run(const SelffuseOptions& o) {
  if (o.input.empty() == o.manifest.empty()) throw UsageError("give exactly one of --input or --manifest");
  const FusionConfig cfg = resolve_config(o);
  const Normalization norm = normalization_from_string(o.normalization);

  if (!o.input.empty()) {
    const Volume fused = fuse_file(o.input, cfg, norm, 1);
    if (!fs::path(o.out).parent_path().empty()) fs::create_directories(fs::path(o.out).parent_path());
    save_volume(fused, o.out);
    std::cout << "selffuse: " << fused.size() << " slices -> " << o.out << '\n';
    return;
  }

  DatasetManifest in = load_manifest(o.manifest);
  fs::create_directories(o.out);
  const fs::path out_manifest = fs::path(o.out) / "manifest.json";
  if (fs::exists(out_manifest) && fs::equivalent(out_manifest, o.manifest))
    throw UsageError("--out would overwrite the input manifest; choose another directory");

  DatasetManifest out;
  int fused_count = 0;
  for (const DatasetEntry& e : in.entries) {
    DatasetEntry d = e;
    const auto rebase = [&](const std::string& p) { return relative_to(in.resolve(p), o.out); };
    d.noisy = rebase(e.noisy);
    if (e.clean) d.clean = rebase(*e.clean);
    if (e.rois) d.rois = rebase(*e.rois);
    if (e.reference) d.reference = rebase(*e.reference);
    if (e.role == o.role) {
      const Volume fused = fuse_file(in.resolve(e.noisy), cfg, norm, e.repeats_per_location);
      d.reference = e.id + "_fused.raw";
      save_volume(fused, (fs::path(o.out) / *d.reference).string());
      ++fused_count;
      std::cout << "selffuse: " << e.id << " (" << fused.size() << " slices)\n";
    }
    out.entries.push_back(std::move(d));
  }
  save_manifest(out, out_manifest.string());
  std::cout << "selffuse: " << fused_count << " volumes -> " << out_manifest.string() << '\n';
}

}  // namespace

Action add_selffuse(CLI::App& root) {
  auto o = std::make_shared<SelffuseOptions>();
  CLI::App* sub = root.add_subcommand("selffuse", "Build self-fused reference volumes");
  sub->add_option("--input", o->input, "Volume to fuse (.raw, .tif, .png or a PNG directory)")
      ->check(CLI::ExistingPath);
  sub->add_option("--manifest", o->manifest, "Dataset manifest; every entry with --role gets a reference")
      ->check(CLI::ExistingFile);
  sub->add_option("--out", o->out, "Output file (with --input) or directory (with --manifest)")->required();
  sub->add_option("--role", o->role, "Manifest role to fuse")->capture_default_str();
  sub->add_option("--radius", o->fusion.radius, "Neighbours on each side")->capture_default_str();
  sub->add_option("--registration,--method", o->registration, "Registration method")
      ->check(CLI::IsMember({"none", "translation", "external"}))
      ->capture_default_str();
  sub->add_option("--bandwidth", o->bandwidth, "Similarity bandwidth h (default: median neighbour MSE)");
  sub->add_option("--max-shift", o->fusion.registration_options.max_shift, "Translation search window, pixels")
      ->capture_default_str();
  sub->add_option("--external-command", o->fusion.registration_options.external_command,
                  "Command template with {moving} {fixed} {out}; defaults to $SPECKLEDIFF_REGISTER_CMD");
  sub->add_option("--external-format", o->fusion.registration_options.external_format, "Exchange format")
      ->check(CLI::IsMember({"raw", "png"}))
      ->capture_default_str();
  sub->add_option("--max-parallel", o->fusion.max_parallel, "Slices fused concurrently")->capture_default_str();
  sub->add_option("--normalize", o->normalization, "Input normalization")
      ->check(CLI::IsMember(kNormalizationNames))
      ->capture_default_str();
  return [o] { run(*o); };
}

}  // namespace specklediff::cli
