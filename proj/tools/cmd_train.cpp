#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>

#include "cli_common.hpp"
#include "commands.hpp"
#include "specklediff/checkpoint.hpp"
#include "specklediff/io.hpp"
#include "specklediff/manifest.hpp"
#include "specklediff/preprocess.hpp"
#include "specklediff/trainer.hpp"

namespace fs = std::filesystem;

namespace specklediff::cli {

namespace {

struct TrainOptions {
  std::string manifest;
  std::string out;
  std::string loss_csv;
  std::string resume;
  std::string role = "train";
  std::string network = "desk";
  std::optional<int> base_channels;
  std::optional<int> depth;
  std::optional<int> time_embed_dim;
  std::string loss_weighting = "simplified";
  std::string normalization = "auto";
  int trim = 0;
  TrainConfig train;
};

NetworkConfig network_config(const TrainOptions& o) {
  NetworkConfig net = o.network == "tiny" ? NetworkConfig::tiny()
                      : o.network == "large" ? NetworkConfig::large()
                                             : NetworkConfig::desk();
  if (o.base_channels) net.base_channels = *o.base_channels;
  if (o.depth) net.depth = *o.depth;
  if (o.time_embed_dim) net.time_embed_dim = *o.time_embed_dim;
  net.T = o.train.T;
  net.validate();
  return net;
}

std::vector<Image> load_training_images(const TrainOptions& o) {
  const DatasetManifest m = load_manifest(o.manifest);
  const Normalization norm = normalization_from_string(o.normalization);
  std::vector<Image> images;
  for (const DatasetEntry* e : m.with_role(o.role)) {
    if (!e->reference)
      std::cerr << "train: warning: " << e->id << " has no self-fused reference; using the noisy volume\n";
    VolumeLayout layout;
    layout.repeats_per_location = e->reference ? 1 : e->repeats_per_location;
    Volume v = load_volume(m.resolve(e->reference.value_or(e->noisy)), layout);
    v = apply_normalization(average_volume_repeats(v), norm);
    const int n = static_cast<int>(v.size());
    if (n <= 2 * o.trim) throw UsageError(e->id + ": --trim " + std::to_string(o.trim) + " leaves no slices");
    for (int i = o.trim; i < n - o.trim; ++i) images.push_back(v.slices[static_cast<std::size_t>(i)]);
  }
  if (images.empty()) throw UsageError("manifest has no entries with role '" + o.role + "'");
  return images;
}

std::string default_loss_csv(const std::string& checkpoint_path) {
  fs::path p(checkpoint_path);
  p.replace_extension(".loss.csv");
  return p.string();
}

void run(const TrainOptions& o) {
  TrainConfig cfg = o.train;
  cfg.loss_weighting = loss_weighting_from_string(o.loss_weighting);
  cfg.validate();
  const std::vector<Image> data = load_training_images(o);

  const auto progress = [](int epoch, double median_loss, double lr) {
    std::printf("epoch %d median_loss %.6f lr %.3e\n", epoch, median_loss, lr);
    std::fflush(stdout);
  };
  std::cout << "train: " << data.size() << " images, " << cfg.epochs << " epochs\n";
  TrainResult result = o.resume.empty() ? train(data, network_config(o), cfg, progress)
                                        : train(data, load_checkpoint(o.resume), cfg, progress);

  if (!fs::path(o.out).parent_path().empty()) fs::create_directories(fs::path(o.out).parent_path());
  save_checkpoint(result.checkpoint, o.out);
  const std::string csv = o.loss_csv.empty() ? default_loss_csv(o.out) : o.loss_csv;
  write_loss_csv(result.log, csv);
  std::cout << "train: checkpoint -> " << o.out << ", loss log -> " << csv << '\n';
}

}  // namespace

Action add_train(CLI::App& root) {
  auto o = std::make_shared<TrainOptions>();
  CLI::App* sub = root.add_subcommand("train", "Train the noise predictor on self-fused references");
  sub->add_option("--manifest", o->manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", o->out, "Checkpoint to write")->required();
  sub->add_option("--loss-csv", o->loss_csv, "Per-step loss log (default: <out>.loss.csv)");
  sub->add_option("--resume", o->resume, "Continue from this checkpoint for --epochs more epochs")
      ->check(CLI::ExistingFile);
  sub->add_option("--role", o->role, "Manifest role to train on")->capture_default_str();
  sub->add_option("--trim", o->trim, "Slices dropped from each end of every volume")->capture_default_str();
  sub->add_option("--normalize", o->normalization, "Input normalization")
      ->check(CLI::IsMember(kNormalizationNames))
      ->capture_default_str();

  sub->add_option("--network", o->network, "Architecture preset")
      ->check(CLI::IsMember({"desk", "tiny", "large"}))
      ->capture_default_str();
  sub->add_option("--base-channels", o->base_channels, "Override the preset's base channel count");
  sub->add_option("--depth", o->depth, "Override the preset's depth");
  sub->add_option("--time-embed-dim", o->time_embed_dim, "Override the preset's step embedding width");

  TrainConfig& c = o->train;
  sub->add_option("--epochs", c.epochs, "Epochs to run")->capture_default_str();
  sub->add_option("--batch-size", c.batch_size, "Images per step")->capture_default_str();
  sub->add_option("--initial-lr,--lr", c.initial_lr, "Learning rate before any halving")->capture_default_str();
  sub->add_option("--lr-halving-period-epochs", c.lr_halving_period_epochs, "Epochs between halvings")
      ->capture_default_str();
  sub->add_option("--T", c.T, "Diffusion steps")->capture_default_str();
  sub->add_option("--beta-start", c.beta_start, "First beta")->capture_default_str();
  sub->add_option("--beta-end", c.beta_end, "Last beta")->capture_default_str();
  sub->add_option("--loss-weighting", o->loss_weighting, "Objective weighting")
      ->check(CLI::IsMember({"simplified", "bound_weighted"}))
      ->capture_default_str();
  sub->add_option("--seed", c.seed, "Seed for initialization, batching and noise draws")->capture_default_str();
  sub->add_option("--adam-beta1", c.adam_beta1, "Adam first-moment decay")->capture_default_str();
  sub->add_option("--adam-beta2", c.adam_beta2, "Adam second-moment decay")->capture_default_str();
  sub->add_option("--adam-eps", c.adam_eps, "Adam epsilon")->capture_default_str();
  return [o] { run(*o); };
}

}  // namespace specklediff::cli
